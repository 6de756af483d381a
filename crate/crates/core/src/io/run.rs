use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Backend, Operation, RunConfig};
use crate::asymptotics::{cesaro_check, llt_fit, LltOptions, ParitySelect};
use crate::error::{Error, Result};
use crate::green::{
    ancona_report, avoidance_decay, check_harnack, check_subadditivity, check_trivial_ancona, eta_partial,
    first_visit, h_kernel, sample_geodesic_triples, sample_triples, sphere_h_sums, GreenOracle, SeriesGreen, TreeGreen,
};
use crate::group::{BuildParams, GeodesicAutomaton, Group, NormalForm};
use crate::numeric::linear_fit;
use crate::shift::{build_phi_r, operator_sphere_sums, pressure_curve, sqrt_law_fit};
use crate::tree_exact::{eta_exact, radius_r, series_coefficients, BranchSystem, CoefficientSeries, Precision};
use crate::walk::{
    escape_rate, green_cocycle_rate, make_measure, return_sequence, return_sequence_cached,
    spectral_radius_estimate, DistributionCache, FiniteMeasure, MeasureSpec, Parity,
};

/// Run-level record written next to the artifacts.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub operation: String,
    pub config_hash: String,
    pub group_hash: Option<String>,
    pub measure_hash: Option<String>,
    pub cache_keys: Vec<String>,
    pub artifacts: Vec<String>,
    /// "pass", "fail" (a check reported violations) or "error".
    pub status: String,
    pub error: Option<String>,
    pub summary: Value,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub exit_code: i32,
}

/// Artifact writer bound to an output directory and a config hash.
struct Output {
    dir: PathBuf,
    config_hash: String,
    files: Vec<String>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

impl Output {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let file = format!("{name}.csv");
        let mut f = fs::File::create(self.dir.join(&file))?;
        writeln!(f, "# hyperwalk {} config {}", env!("CARGO_PKG_VERSION"), self.config_hash)?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(file);
        Ok(())
    }

    fn json(&mut self, name: &str, body: &impl Serialize) -> Result<()> {
        let file = format!("{name}.json");
        let doc = json!({ "config_hash": self.config_hash, "result": body });
        fs::write(self.dir.join(&file), serde_json::to_string_pretty(&doc)? + "\n")?;
        self.files.push(file);
        Ok(())
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    group: &'a Group,
    mu: &'a FiniteMeasure,
    out: Output,
    cache_keys: Vec<String>,
}

/// Result of one operation: summary for the manifest and a verdict.
struct Done {
    summary: Value,
    pass: bool,
}

impl Done {
    fn ok(summary: Value) -> Self {
        Done { summary, pass: true }
    }
}

/// Execute a configuration and write its artifacts and manifest.
///
/// Errors before the output directory exists are returned as `Err`; later
/// failures are recorded in the manifest and reflected in `exit_code`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    fs::create_dir_all(&cfg.output_dir)?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut manifest = Manifest {
        schema_version: cfg.schema_version,
        tool: "hyperwalk".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        operation: cfg.operation.to_string(),
        config_hash: cfg.hash(),
        group_hash: None,
        measure_hash: None,
        cache_keys: Vec::new(),
        artifacts: Vec::new(),
        status: "error".into(),
        error: None,
        summary: Value::Null,
        started_unix,
        elapsed_seconds: 0.0,
    };
    fs::write(cfg.output_dir.join("config.json"), cfg.to_json() + "\n")?;
    let result = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Resource(e.to_string()))
            .and_then(|pool| pool.install(|| execute(cfg, &mut manifest))),
        None => execute(cfg, &mut manifest),
    };
    let exit_code = match result {
        Ok(done) => {
            manifest.status = if done.pass { "pass" } else { "fail" }.into();
            manifest.summary = done.summary;
            0
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            e.exit_code()
        }
    };
    manifest.elapsed_seconds = started.elapsed().as_secs_f64();
    let manifest_path = cfg.output_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
        exit_code,
    })
}

fn execute(cfg: &RunConfig, manifest: &mut Manifest) -> Result<Done> {
    let group = Group::new(cfg.group.clone())?;
    manifest.group_hash = Some(group.hash().to_string());
    let spec = cfg.measure.clone().unwrap_or_else(|| MeasureSpec::simple(&group));
    let mu = make_measure(&spec, &group)?;
    manifest.measure_hash = Some(mu.hash().to_string());
    let mut ctx = Ctx {
        cfg,
        group: &group,
        mu: &mu,
        out: Output {
            dir: cfg.output_dir.clone(),
            config_hash: manifest.config_hash.clone(),
            files: Vec::new(),
        },
        cache_keys: Vec::new(),
    };
    let done = match cfg.operation {
        Operation::Spheres => spheres(&mut ctx),
        Operation::Pn => pn(&mut ctx),
        Operation::SpectralRadius => spectral_radius(&mut ctx),
        Operation::Green => green(&mut ctx),
        Operation::Ancona => ancona(&mut ctx),
        Operation::Avoidance => avoidance(&mut ctx),
        Operation::Pressure => pressure(&mut ctx),
        Operation::SphereSums => sphere_sums(&mut ctx),
        Operation::Eta => eta(&mut ctx),
        Operation::Llt => llt(&mut ctx),
        Operation::Cesaro => cesaro(&mut ctx),
        Operation::Renewal => renewal(&mut ctx),
        Operation::Cocycle => cocycle(&mut ctx),
        Operation::ValidateAutomaton => validate_automaton(&mut ctx),
    };
    manifest.artifacts = std::mem::take(&mut ctx.out.files);
    manifest.cache_keys = std::mem::take(&mut ctx.cache_keys);
    done
}

impl<'a> Ctx<'a> {
    fn oracle(&self) -> Result<Box<dyn GreenOracle + 'a>> {
        let p = &self.cfg.params;
        let series = || -> Result<Box<dyn GreenOracle + 'a>> {
            Ok(Box::new(SeriesGreen::new(
                self.mu,
                self.group,
                p.n_max.unwrap_or(12),
                p.prune_eps.unwrap_or(0.0),
                None,
            )?))
        };
        match p.backend.unwrap_or_default() {
            Backend::Tree => Ok(Box::new(TreeGreen::new(self.mu, self.group)?)),
            Backend::Series => series(),
            Backend::Auto => match TreeGreen::new(self.mu, self.group) {
                Ok(t) => Ok(Box::new(t)),
                Err(Error::Unsupported(_)) => series(),
                Err(e) => Err(e),
            },
        }
    }

    fn tree(&self) -> Result<BranchSystem> {
        BranchSystem::build(self.mu, self.group)
    }

    /// The configured r grid, scaled by `big_r` when relative.
    fn r_grid(&self, big_r: f64, default: &[f64], default_relative: bool) -> Vec<f64> {
        let p = &self.cfg.params;
        let (grid, relative) = match &p.r_grid {
            Some(g) => (g.clone(), p.r_relative.unwrap_or(false)),
            None => (default.to_vec(), p.r_relative.unwrap_or(default_relative)),
        };
        if relative {
            // exact R at a relative value of 1
            grid.iter().map(|&t| if t == 1.0 { big_r } else { t * big_r }).collect()
        } else {
            grid
        }
    }

    fn element(&self, word: Option<&String>) -> Result<NormalForm> {
        match word {
            Some(w) => self.group.element(w),
            None => Ok(self.group.identity()),
        }
    }

    fn automaton(&self) -> Result<GeodesicAutomaton> {
        match &self.cfg.params.automaton_file {
            Some(path) => read_automaton(path, self.group),
            None => GeodesicAutomaton::build(self.group, &BuildParams::default()),
        }
    }

    fn cache(&self) -> Option<DistributionCache> {
        self.cfg.cache_dir.as_ref().map(DistributionCache::new).or_else(DistributionCache::from_env)
    }

    fn coefficients(&self, n_max: usize) -> Result<(BranchSystem, CoefficientSeries, f64)> {
        let sys = self.tree()?;
        let precision = self.cfg.params.precision.unwrap_or(Precision::auto(n_max));
        let c = series_coefficients(&sys, n_max, precision)?;
        let big_r = radius_r(&sys)?.r;
        if c.scale != big_r {
            return Err(Error::Precondition("rational coefficients are not scaled by R; choose f64 or double-double".into()));
        }
        Ok((sys, c, big_r))
    }
}

fn read_automaton(path: &Path, group: &Group) -> Result<GeodesicAutomaton> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read automaton {}: {e}", path.display())))?;
    GeodesicAutomaton::from_text(&text, group)
}

fn spheres(ctx: &mut Ctx) -> Result<Done> {
    let n_max = ctx.cfg.params.n_max.unwrap_or(8);
    let sizes: Vec<usize> = ctx.group.spheres(n_max)?.iter().map(Vec::len).collect();
    let rows: Vec<Vec<String>> = sizes
        .iter()
        .enumerate()
        .map(|(n, &s)| {
            let growth = if n == 0 { String::new() } else { num(s as f64 / sizes[n - 1] as f64) };
            vec![n.to_string(), s.to_string(), growth]
        })
        .collect();
    ctx.out.csv("spheres", &["n", "size", "growth"], &rows)?;
    Ok(Done::ok(json!({ "n_max": n_max, "sizes": sizes })))
}

fn pn(ctx: &mut Ctx) -> Result<Done> {
    let n_max = ctx.cfg.params.n_max.unwrap_or(12);
    let eps = ctx.cfg.params.prune_eps.unwrap_or(0.0);
    let series = match ctx.cache() {
        Some(cache) => {
            let (s, keys) = return_sequence_cached(ctx.mu, ctx.group, n_max, eps, &cache)?;
            ctx.cache_keys = keys;
            s
        }
        None => return_sequence(ctx.mu, ctx.group, n_max, eps)?,
    };
    let rows: Vec<Vec<String>> = (0..=n_max)
        .map(|n| vec![n.to_string(), num(series.values[n]), num(series.errors[n])])
        .collect();
    ctx.out.csv("pn", &["n", "p_n", "error"], &rows)?;
    Ok(Done::ok(json!({ "n_max": n_max, "prune_eps": eps, "p_n_max": series.values[n_max] })))
}

fn spectral_radius(ctx: &mut Ctx) -> Result<Done> {
    let n_max = ctx.cfg.params.n_max.unwrap_or(24);
    let eps = ctx.cfg.params.prune_eps.unwrap_or(0.0);
    let exact = match ctx.tree() {
        Ok(sys) => Some(radius_r(&sys)?.r),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let series = return_sequence(ctx.mu, ctx.group, n_max, eps)?;
    let (rho, diag) = spectral_radius_estimate(&series)?;
    let body = json!({
        "exact_radius": exact,
        "exact_rho": exact.map(|r| 1.0 / r),
        "estimated_rho": rho,
        "estimated_radius": 1.0 / rho,
        "agreement": exact.map(|r| (rho - 1.0 / r).abs()),
        "diagnostics": diag,
    });
    ctx.out.json("spectral_radius", &body)?;
    Ok(Done::ok(body))
}

fn green(ctx: &mut Ctx) -> Result<Done> {
    let oracle = ctx.oracle()?;
    let x = ctx.element(ctx.cfg.params.x.as_ref())?;
    let y = ctx.element(ctx.cfg.params.y.as_ref())?;
    let grid = ctx.r_grid(oracle.radius(), &[1.0], false);
    let (xs, ys) = (ctx.group.format(&x), ctx.group.format(&y));
    let mut rows = Vec::new();
    for &r in &grid {
        let g = oracle.green(&x, &y, r)?.interval();
        let f = first_visit(oracle.as_ref(), &x, &y, r)?.interval();
        let h = h_kernel(oracle.as_ref(), &x, &y, r)?.interval();
        rows.push(vec![
            num(r),
            xs.clone(),
            ys.clone(),
            num(g.lo),
            num(g.hi),
            num(f.lo),
            num(f.hi),
            num(h.lo),
            num(h.hi),
        ]);
    }
    ctx.out.csv(
        "green",
        &["r", "x", "y", "green_lo", "green_hi", "first_visit_lo", "first_visit_hi", "h_lo", "h_hi"],
        &rows,
    )?;
    Ok(Done::ok(json!({ "exact": oracle.is_exact(), "radius": oracle.radius(), "points": grid.len() })))
}

fn ancona(ctx: &mut Ctx) -> Result<Done> {
    let p = &ctx.cfg.params;
    let oracle = ctx.oracle()?;
    let grid = ctx.r_grid(oracle.radius(), &[0.5, 0.9, 1.0], true);
    let (radius, count, seed) = (p.radius.unwrap_or(4), p.samples.unwrap_or(100), p.seed.unwrap_or(1));
    let on_geodesic = sample_geodesic_triples(ctx.group, radius, count, seed);
    let rep = ancona_report(oracle.as_ref(), &on_geodesic, &grid, p.threshold.unwrap_or(0.0))?;
    // the inequality suites take unconstrained triples
    let triples = sample_triples(ctx.group, radius, count, seed);
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|row| {
            let [x, y, z] = &rep.configurations[row.config];
            vec![
                row.config.to_string(),
                x.clone(),
                y.clone(),
                z.clone(),
                num(row.r),
                num(row.ratio.lo),
                num(row.ratio.hi),
                num(row.normalized.lo),
                num(row.normalized.hi),
                row.trivial_ok.to_string(),
            ]
        })
        .collect();
    ctx.out.csv(
        "ancona",
        &["config", "x", "y", "z", "r", "ratio_lo", "ratio_hi", "normalized_lo", "normalized_hi", "trivial_ok"],
        &rows,
    )?;
    let subadditivity = check_subadditivity(oracle.as_ref(), &triples, &grid)?;
    let trivial = check_trivial_ancona(oracle.as_ref(), &triples, &grid)?;
    let pairs: Vec<(NormalForm, NormalForm)> = triples.iter().map(|(x, y, _)| (x.clone(), y.clone())).collect();
    let harnack = check_harnack(oracle.as_ref(), &pairs, &grid)?;
    let pass = rep.trivial_violations == 0
        && subadditivity.violations == 0
        && trivial.violations == 0
        && harnack.violations == 0;
    let body = json!({
        "configurations": rep.configurations.len(),
        "r_grid": grid,
        "supremum": rep.supremum,
        "normalized_deviation": rep.normalized_deviation,
        "trivial_violations": rep.trivial_violations,
        "subadditivity": subadditivity,
        "trivial_ancona": trivial,
        "harnack": harnack,
    });
    ctx.out.json("ancona", &body)?;
    Ok(Done { summary: body, pass })
}

fn avoidance(ctx: &mut Ctx) -> Result<Done> {
    let p = &ctx.cfg.params;
    let need = |w: &Option<String>, name: &str| {
        w.clone().ok_or_else(|| Error::Precondition(format!("avoidance needs params.{name}")))
    };
    let x = ctx.group.element(&need(&p.x, "x")?)?;
    let center = ctx.group.element(&need(&p.y, "y")?)?;
    let z = ctx.group.element(&need(&p.z, "z")?)?;
    let n_list = p.n_list.clone().unwrap_or_else(|| vec![0, 1, 2]);
    let oracle = ctx.oracle()?;
    let r = ctx.r_grid(oracle.radius(), &[1.0], false)[0];
    let table = avoidance_decay(oracle.as_ref(), &x, &z, &center, &n_list, r, p.margin.unwrap_or(4))?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|row| {
            let iv = row.value.interval();
            vec![row.n.to_string(), num(iv.lo), num(iv.hi), num(row.log_value)]
        })
        .collect();
    ctx.out.csv("avoidance", &["n", "lo", "hi", "log_value"], &rows)?;
    let (ns, logs): (Vec<f64>, Vec<f64>) = table
        .rows
        .iter()
        .filter(|row| row.log_value.is_finite())
        .map(|row| (row.n as f64, row.log_value))
        .unzip();
    let decay = if ns.len() >= 2 { linear_fit(&ns, &logs).ok().map(|(_, b, _)| -b) } else { None };
    let body = json!({
        "r": r,
        "enclosing_radius": table.enclosing_radius,
        "trivial": table.trivial,
        "log_decay_rate": decay,
    });
    ctx.out.json("avoidance", &body)?;
    Ok(Done::ok(body))
}

fn pressure(ctx: &mut Ctx) -> Result<Done> {
    let aut = ctx.automaton()?;
    let oracle = ctx.oracle()?;
    let big_r = oracle.radius();
    let default: Vec<f64> = (2..=10).map(|j| 1.0 - 2f64.powi(-j)).chain([1.0]).collect();
    let grid = ctx.r_grid(big_r, &default, true);
    let curve = pressure_curve(&aut, oracle.as_ref(), &grid, ctx.cfg.params.depth.unwrap_or(3))?;
    let rows: Vec<Vec<String>> = curve
        .rows
        .iter()
        .map(|row| {
            vec![
                num(row.r),
                row.component.to_string(),
                num(row.pressure),
                num(row.gap),
                num(row.ratio),
            ]
        })
        .collect();
    ctx.out.csv("pressure", &["r", "component", "pressure", "gap", "ratio"], &rows)?;
    let below: Vec<(f64, f64)> = curve.max_pressure.iter().copied().filter(|&(r, p)| r < big_r && p < 0.0).collect();
    let fit = if oracle.is_exact() && below.len() >= 3 { sqrt_law_fit(&below, big_r).ok() } else { None };
    let body = json!({
        "radius": big_r,
        "max_pressure": curve.max_pressure,
        "monotone": curve.monotone,
        "sqrt_law": fit,
    });
    ctx.out.json("pressure", &body)?;
    Ok(Done {
        summary: body,
        pass: curve.monotone,
    })
}

fn sphere_sums(ctx: &mut Ctx) -> Result<Done> {
    let oracle = ctx.oracle()?;
    let r = ctx.r_grid(oracle.radius(), &[1.0], true)[0];
    let k_max = ctx.cfg.params.k_max.unwrap_or(12);
    let sums = sphere_h_sums(oracle.as_ref(), r, k_max)?;
    // the transfer-operator route needs an automaton and a precise potential
    let operator = match (ctx.cfg.params.depth, ctx.automaton()) {
        (Some(depth), Ok(aut)) => {
            let pot = build_phi_r(&aut, oracle.as_ref(), r, depth)?;
            let h_ee = h_kernel(oracle.as_ref(), &ctx.group.identity(), &ctx.group.identity(), r)?.interval().mid();
            Some(operator_sphere_sums(&aut, &pot, k_max, h_ee))
        }
        _ => None,
    };
    let rows: Vec<Vec<String>> = sums
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let iv = s.interval();
            let op = operator.as_ref().map(|o| num(o[k])).unwrap_or_default();
            vec![k.to_string(), num(iv.lo), num(iv.hi), op]
        })
        .collect();
    ctx.out.csv("sphere_sums", &["k", "lower", "upper", "operator"], &rows)?;
    let body = json!({
        "r": r,
        "k_max": k_max,
        "min_lower": sums.iter().map(|s| s.value).fold(f64::INFINITY, f64::min),
        "max_upper": sums.iter().map(|s| s.upper()).fold(0.0, f64::max),
    });
    Ok(Done::ok(body))
}

fn eta(ctx: &mut Ctx) -> Result<Done> {
    let oracle = ctx.oracle()?;
    let grid = ctx.r_grid(oracle.radius(), &[0.5, 0.75, 0.9, 0.99], true);
    let k_max = ctx.cfg.params.k_max.unwrap_or(12);
    let sys = if oracle.is_exact() { Some(ctx.tree()?) } else { None };
    let mut rows = Vec::new();
    for &r in &grid {
        let e = eta_partial(oracle.as_ref(), r, k_max)?;
        let exact = match &sys {
            Some(s) if r < oracle.radius() => num(eta_exact(s, r)?),
            _ => String::new(),
        };
        rows.push(vec![
            num(r),
            num(e.lower),
            e.upper.map(num).unwrap_or_default(),
            e.tail.map(num).unwrap_or_default(),
            exact,
        ]);
    }
    ctx.out.csv("eta", &["r", "lower", "upper", "tail", "exact"], &rows)?;
    Ok(Done::ok(json!({ "k_max": k_max, "points": grid.len() })))
}

fn even_if_periodic(mu: &FiniteMeasure) -> (Option<ParitySelect>, usize) {
    match mu.parity() {
        Parity::Period2 => (Some(ParitySelect::Even), 2),
        _ => (None, 1),
    }
}

fn llt(ctx: &mut Ctx) -> Result<Done> {
    let p = &ctx.cfg.params;
    let (n_min, n_max) = (p.n_min.unwrap_or(200), p.n_max.unwrap_or(2000));
    let (_, c, big_r) = ctx.coefficients(n_max)?;
    let (parity, _) = even_if_periodic(ctx.mu);
    let rep = llt_fit(&c.scaled, ctx.mu.parity(), &LltOptions::new(n_min, n_max, parity))?;
    let rows: Vec<Vec<String>> = rep
        .fit
        .points
        .iter()
        .map(|&(n, v)| vec![num(n), num(v), num(v * n.powf(rep.template_exponent))])
        .collect();
    ctx.out.csv("llt", &["n", "p_n_scaled", "plateau"], &rows)?;
    let body = json!({
        "exponent": rep.fit.exponent,
        "amplitude": rep.fit.amplitude,
        "residual": rep.fit.residual,
        "plateau_variation": rep.plateau_variation,
        "template_exponent": rep.template_exponent,
        "radius": big_r,
        "n_min": n_min,
        "n_max": n_max,
        "precision": c.precision,
    });
    ctx.out.json("llt", &body)?;
    Ok(Done::ok(body))
}

fn cesaro(ctx: &mut Ctx) -> Result<Done> {
    let n_list = ctx.cfg.params.n_list.clone().unwrap_or_else(|| vec![1000, 2000, 4000]);
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    let (_, c, _) = ctx.coefficients(n_max)?;
    let rep = cesaro_check(&c.scaled, &n_list, 0.5)?;
    let rows: Vec<Vec<String>> =
        rep.points.iter().map(|&(n, s, t)| vec![n.to_string(), num(s), num(t)]).collect();
    ctx.out.csv("cesaro", &["n", "partial_sum", "normalized"], &rows)?;
    ctx.out.json("cesaro", &rep)?;
    Ok(Done {
        summary: json!({ "max_relative_change": rep.max_relative_change, "growth_exponent": rep.growth_exponent }),
        pass: !rep.mismatch,
    })
}

fn renewal(ctx: &mut Ctx) -> Result<Done> {
    let p = &ctx.cfg.params;
    let (n_min, n_max) = (p.n_min.unwrap_or(500), p.n_max.unwrap_or(2000));
    let (sys, c, big_r) = ctx.coefficients(n_max)?;
    let g_r = crate::tree_exact::green_ee(&sys, big_r)?;
    let (_, step) = even_if_periodic(ctx.mu);
    let zeros = vec![0.0; c.scaled.len()];
    let rep = crate::asymptotics::renewal_first_return(&c.scaled, &zeros, big_r, Some(g_r), (n_min, n_max), step)?;
    let rows: Vec<Vec<String>> = rep
        .ratios
        .iter()
        .map(|&(n, ratio)| vec![n.to_string(), num(rep.series.scaled[n]), num(c.scaled[n]), num(ratio)])
        .collect();
    ctx.out.csv("renewal", &["n", "f_n_scaled", "p_n_scaled", "ratio"], &rows)?;
    let body = json!({
        "radius": big_r,
        "reconstruction_error": rep.reconstruction_error,
        "target": rep.target,
        "max_deviation": rep.max_deviation,
        "stopped_at": rep.series.stopped_at,
        "total": rep.series.total,
    });
    ctx.out.json("renewal", &body)?;
    Ok(Done::ok(body))
}

fn cocycle(ctx: &mut Ctx) -> Result<Done> {
    let p = &ctx.cfg.params;
    let (n, samples, seed) = (p.n_max.unwrap_or(400), p.samples.unwrap_or(500), p.seed.unwrap_or(1));
    let escape = escape_rate(ctx.mu, ctx.group, n, samples, seed)?;
    let oracle = ctx.oracle()?;
    let big_r = oracle.radius();
    let e = ctx.group.identity();
    let log_f = |x: &NormalForm| -> Result<f64> { Ok(first_visit(oracle.as_ref(), &e, x, big_r)?.interval().mid().ln()) };
    let rate = green_cocycle_rate(ctx.mu, ctx.group, &log_f, n, samples, seed)?;
    let body = json!({ "radius": big_r, "escape_rate": escape, "cocycle_rate": rate });
    ctx.out.json("cocycle", &body)?;
    Ok(Done::ok(body))
}

fn validate_automaton(ctx: &mut Ctx) -> Result<Done> {
    let radius = ctx.cfg.params.radius.unwrap_or(8);
    let aut = match &ctx.cfg.params.automaton_file {
        Some(path) => read_automaton(path, ctx.group)?,
        None => GeodesicAutomaton::build(ctx.group, &BuildParams { verify_radius: 0, ..BuildParams::default() })?,
    };
    let rep = aut.validate(ctx.group, radius)?;
    let rows: Vec<Vec<String>> = rep
        .per_radius
        .iter()
        .map(|c| {
            vec![
                c.n.to_string(),
                c.paths.to_string(),
                c.sphere.to_string(),
                c.injective.to_string(),
                c.missing.to_string(),
                c.extraneous.to_string(),
            ]
        })
        .collect();
    ctx.out.csv("validate_automaton", &["n", "paths", "sphere", "injective", "missing", "extraneous"], &rows)?;
    ctx.out.json("validate_automaton", &rep)?;
    Ok(Done {
        summary: json!({ "radius": radius, "states": aut.num_states(), "counterexamples": rep.counterexamples }),
        pass: rep.pass,
    })
}
