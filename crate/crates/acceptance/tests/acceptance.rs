//! Acceptance checks. Each criterion prints one PASS/FAIL line; the binary
//! exits non-zero when any criterion fails. Pass criterion numbers as
//! arguments to run a subset.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hyperwalk::asymptotics::*;
use hyperwalk::green::*;
use hyperwalk::group::{AutomatonEdge, BuildParams, GeodesicAutomaton, Group, GroupSpec};
use hyperwalk::shift::*;
use hyperwalk::tree_exact::*;
use hyperwalk::walk::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Outcomes of the individual checks inside one criterion.
#[derive(Default)]
struct Checks {
    passed: Vec<String>,
    failed: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: String) {
        if ok {
            self.passed.push(what);
        } else {
            self.failed.push(what);
        }
    }
}

type Outcome = hyperwalk::Result<Checks>;

fn srw(spec: GroupSpec) -> (Group, FiniteMeasure) {
    let g = Group::new(spec).unwrap();
    let mu = make_measure(&MeasureSpec::simple(&g), &g).unwrap();
    (g, mu)
}

fn free(k: usize) -> (Group, FiniteMeasure) {
    srw(GroupSpec::free(k))
}

/// F_r(e,a) for SRW on free(k): smaller root of (2k−1)rF² − 2kF + r = 0.
fn free_f(k: usize, r: f64) -> f64 {
    let (a, b) = ((2 * k - 1) as f64 * r, 2.0 * k as f64);
    (b - (b * b - 4.0 * a * r).max(0.0).sqrt()) / (2.0 * a)
}

/// R for SRW on free(k): reciprocal of ρ = √(2k−1)/k.
fn free_radius(k: usize) -> f64 {
    k as f64 / ((2 * k - 1) as f64).sqrt()
}

fn binomial_return(n: u64) -> f64 {
    // C(2n, n) is exact in u128 and below 2⁵³ for n ≤ 20
    let c = (1..=n).fold(1u128, |c, i| c * (n + i) as u128 / i as u128);
    c as f64 / 4f64.powi(n as i32)
}

fn c1_lattice() -> Outcome {
    let mut out = Checks::default();
    let (z, zmu) = srw(GroupSpec::lattice(1));
    let s = return_sequence(&zmu, &z, 40, 0.0)?;
    let err = (0..=20u64)
        .map(|n| (s.values[2 * n as usize] - binomial_return(n)).abs())
        .fold(0.0, f64::max);
    out.check(err <= 1e-14, format!("binomial max err {err:.1e}"));

    let long = return_sequence(&zmu, &z, 2000, 0.0)?;
    let rep = llt_fit(&long.values, zmu.parity(), &LltOptions::new(200, 2000, Some(ParitySelect::Even)))?;
    let e1 = rep.fit.exponent;
    out.check((e1 + 0.5).abs() <= 0.05, format!("Z exponent {e1:.4}"));

    let (z2, z2mu) = srw(GroupSpec::lattice(2));
    let s2 = return_sequence(&z2mu, &z2, 200, 0.0)?;
    let rep = llt_fit(&s2.values, z2mu.parity(), &LltOptions::new(50, 200, Some(ParitySelect::Even)))?;
    let e2 = rep.fit.exponent;
    out.check((e2 + 1.0).abs() <= 0.08, format!("Z² exponent {e2:.4}"));
    Ok(out)
}

fn c2_tree_coefficients() -> Outcome {
    let mut out = Checks::default();
    for k in [2, 3] {
        let (g, mu) = free(k);
        let sys = BranchSystem::build(&mu, &g)?;
        let c = series_coefficients(&sys, 12, Precision::F64)?;
        let conv = return_sequence(&mu, &g, 12, 0.0)?;
        let err = (0..=12).map(|n| (c.p(n) - conv.values[n]).abs()).fold(0.0, f64::max);
        out.check(err <= 1e-12, format!("free({k}) max err {err:.1e}"));
    }
    Ok(out)
}

fn c3_spectral_radius() -> Outcome {
    let mut out = Checks::default();
    for k in [2, 3] {
        let (g, mu) = free(k);
        let big_r = radius_r(&BranchSystem::build(&mu, &g)?)?.r;
        let oracle = free_radius(k);
        out.check((big_r - oracle).abs() <= 1e-9, format!("free({k}) R {big_r:.9} vs k/√(2k−1)"));
        if k == 2 {
            out.check((big_r - 1.154_700_5).abs() <= 1e-6, format!("R = {big_r:.7}"));
            let s = return_sequence(&mu, &g, 24, 0.0)?;
            let (rho, _) = spectral_radius_estimate(&s)?;
            let gap = (rho - 1.0 / big_r).abs();
            out.check(gap <= 1e-3, format!("walk estimate ρ {rho:.5}, off by {gap:.1e}"));
        }
    }
    Ok(out)
}

fn c4_green_values() -> Outcome {
    let mut out = Checks::default();
    let (g, mu) = free(2);
    let t = TreeGreen::new(&mu, &g)?;
    let (e, a) = (g.identity(), g.element("a")?);
    let big_r = t.radius();
    // G = 1 + r·F·G from the first step, F from its quadratic
    let g_of = |r: f64| 1.0 / (1.0 - r * free_f(2, r));
    let cases = [
        ("G_1(e,e)", t.green(&e, &e, 1.0)?.value, 1.5, g_of(1.0)),
        ("G_1(e,a)", t.green(&e, &a, 1.0)?.value, 0.5, g_of(1.0) * free_f(2, 1.0)),
        ("F_1(e,a)", first_visit(&t, &e, &a, 1.0)?.value, 1.0 / 3.0, free_f(2, 1.0)),
        ("G_R(e,e)", t.green_ee(big_r)?.value, 3.0, g_of(free_radius(2))),
    ];
    for (name, v, stated, oracle) in cases {
        let ok = (v - stated).abs() <= 1e-10 && (v - oracle).abs() <= 1e-10;
        out.check(ok, format!("{name} {v:.12}"));
    }
    Ok(out)
}

fn free_two_llt_series(n_max: usize) -> hyperwalk::Result<(BranchSystem, CoefficientSeries)> {
    let (g, mu) = free(2);
    let sys = BranchSystem::build(&mu, &g)?;
    let c = series_coefficients(&sys, n_max, Precision::DoubleDouble)?;
    Ok((sys, c))
}

fn c5_llt() -> Outcome {
    let mut out = Checks::default();
    let (_, c) = free_two_llt_series(2000)?;
    let mut opts = LltOptions::new(200, 2000, Some(ParitySelect::Even));
    opts.plateau_range = Some((500, 2000));
    let rep = llt_fit(&c.scaled, Parity::Period2, &opts)?;
    let e = rep.fit.exponent;
    out.check((e + 1.5).abs() <= 0.03, format!("exponent {e:.4}"));
    // plateau recomputed from the coefficients
    let plateau: Vec<f64> = (500..=2000).step_by(2).map(|n| c.scaled[n] * (n as f64).powf(1.5)).collect();
    let hi = plateau.iter().cloned().fold(f64::MIN, f64::max);
    let lo = plateau.iter().cloned().fold(f64::MAX, f64::min);
    let var = hi / lo - 1.0;
    out.check(var <= 0.03 && (var - rep.plateau_variation).abs() < 1e-9, format!("plateau variation {:.2}%", 100.0 * var));
    Ok(out)
}

fn c6_singularity() -> Outcome {
    let mut out = Checks::default();
    for k in [2, 3] {
        let (g, mu) = free(k);
        let fit = singularity_fit(&BranchSystem::build(&mu, &g)?)?;
        let e = fit.exponent;
        out.check((e + 0.5).abs() <= 0.01, format!("free({k}) slope {e:.4}"));
    }
    Ok(out)
}

fn c7_eta_scaling() -> Outcome {
    let mut out = Checks::default();
    let (g, mu) = free(2);
    let sys = BranchSystem::build(&mu, &g)?;
    let big_r = radius_r(&sys)?.r;
    let points = (6..=14)
        .map(|j| {
            let r = big_r * (1.0 - 2f64.powi(-j));
            eta_exact(&sys, r).map(|e| (r, e))
        })
        .collect::<hyperwalk::Result<Vec<_>>>()?;
    let rep = eta_scaling_fit(&EtaSamples { big_r, points, amenable: false })?;
    let q = rep.plateau_ratio;
    out.check(q <= 1.2, format!("max/min of η·√(R−r) = {q:.4}, limit 1.2"));
    Ok(out)
}

fn c8_sphere_sums() -> Outcome {
    let mut out = Checks::default();
    let (g, mu) = free(2);
    let t = TreeGreen::new(&mu, &g)?;
    let big_r = t.radius();
    let direct = sphere_h_sums(&t, big_r, 12)?;
    // |S_k|·G_R²·F_R^(2k) with |S_k| = 4·3^(k−1)
    let (f, gee) = (free_f(2, free_radius(2)), 1.0 / (1.0 - free_radius(2) * free_f(2, free_radius(2))));
    let mut worst: f64 = 0.0;
    for k in 1..=12 {
        let oracle = 4.0 * 3f64.powi(k as i32 - 1) * gee * gee * f.powi(2 * k as i32);
        worst = worst.max((direct[k].interval().mid() - 12.0).abs()).max((oracle - 12.0).abs());
    }
    out.check(worst <= 1e-6, format!("sphere sums at R off 12 by ≤ {worst:.1e}"));

    let aut = GeodesicAutomaton::build(&g, &BuildParams::default())?;
    let pot = build_phi_r(&aut, &t, big_r, 6)?;
    // both sides from interval midpoints; `value` is the lower end
    let e = g.identity();
    let h_ee = h_kernel(&t, &e, &e, big_r)?.interval().mid();
    let op = operator_sphere_sums(&aut, &pot, 12, h_ee);
    let gap = (0..=12).map(|k| (op[k] - direct[k].interval().mid()).abs()).fold(0.0, f64::max);
    out.check(gap <= 1e-12, format!("operator vs kernel sums differ by ≤ {gap:.1e}"));
    Ok(out)
}

fn c9_pressure() -> Outcome {
    let mut out = Checks::default();
    let (g, mu) = free(2);
    let t = TreeGreen::new(&mu, &g)?;
    let aut = GeodesicAutomaton::build(&g, &BuildParams::default())?;
    let dag = scc_decompose(&aut);
    let big_r = t.radius();
    let comp = (0..dag.components.len()).find(|&c| !dag.components[c].is_trivial()).unwrap();
    let at_r = pressure_component(&build_phi_r(&aut, &t, big_r, 4)?, &aut, &dag, comp)?;
    out.check(at_r.pressure.abs() <= 1e-8, format!("Press(φ_R) {:.1e}", at_r.pressure));

    let mut grid: Vec<f64> = (2..=14).map(|j| big_r * (1.0 - 2f64.powi(-j))).collect();
    grid.push(big_r);
    let curve = pressure_curve(&aut, &t, &grid, 3)?;
    out.check(curve.monotone, "monotone in r".to_string());
    // on free(2) the pressure is log(3F_r²)
    let off = curve
        .max_pressure
        .iter()
        .map(|&(r, p)| (p - (3.0 * free_f(2, r).powi(2)).ln()).abs())
        .fold(0.0, f64::max);
    out.check(off <= 1e-9, format!("closed form off by {off:.1e}"));
    let fit = sqrt_law_fit(&curve.max_pressure[..curve.max_pressure.len() - 1], big_r)?;
    out.check((fit.exponent - 0.5).abs() <= 0.05, format!("square-root slope {:.4}", fit.exponent));
    Ok(out)
}

/// States 0 → 1 → … → k, each of 1..=k carrying a self-loop.
fn chain_edges(k: usize) -> Vec<(usize, usize)> {
    let mut edges = vec![(0, 1)];
    for s in 1..=k {
        edges.push((s, s));
        if s < k {
            edges.push((s, s + 1));
        }
    }
    edges
}

/// Number of length-n paths from state 0, by repeated matrix-vector products.
fn path_count(n_states: usize, edges: &[(usize, usize)], n: usize) -> f64 {
    let mut v = vec![0.0; n_states];
    v[0] = 1.0;
    for _ in 0..n {
        let mut w = vec![0.0; n_states];
        for &(a, b) in edges {
            w[b] += v[a];
        }
        v = w;
    }
    v.iter().sum()
}

fn c10_jordan() -> Outcome {
    let mut out = Checks::default();
    for (k, expected, tol) in [(2usize, 1.0, 0.1), (3, 2.0, 0.15)] {
        let edges = chain_edges(k);
        let list = edges.iter().map(|&(from, to)| AutomatonEdge { from, label: 0, to }).collect();
        let aut = GeodesicAutomaton::from_edges(k + 1, 0, list)?;
        let pot = CylinderPotential::constant(&aut, 2, 0.0)?;
        let rep = jordan_growth_probe(&aut, &pot, 400)?;
        let counts_ok = rep
            .values
            .iter()
            .all(|&(n, v)| (v - path_count(k + 1, &edges, n)).abs() <= 1e-9 * v.abs().max(1.0));
        out.check(counts_ok, format!("{k}-chain sums match matrix powers"));
        out.check((rep.degree - expected).abs() <= tol, format!("{k}-chain degree {:.3}", rep.degree));
    }
    Ok(out)
}

fn c11_ancona() -> Outcome {
    let mut out = Checks::default();
    for spec in [GroupSpec::free(2), GroupSpec::free(3), GroupSpec::free_product(&[2, 3, 4])] {
        let name = format!("{spec:?}");
        let (g, mu) = srw(spec);
        let t = TreeGreen::new(&mu, &g)?;
        let big_r = t.radius();
        let grid = [0.3, 0.6, 1.0, 0.5 * (1.0 + big_r), big_r];
        let triples = sample_geodesic_triples(&g, 4, 100, 7);
        let rep = ancona_report(&t, &triples, &grid, 0.0)?;
        out.check(
            rep.normalized_deviation <= 1e-8,
            format!("{name}: |ratio·G(y,y) − 1| ≤ {:.1e}", rep.normalized_deviation),
        );
        let plain = sample_triples(&g, 4, 100, 11);
        let pairs: Vec<_> = plain.iter().map(|(x, _, z)| (x.clone(), z.clone())).collect();
        let suites = [
            ("subadditivity", check_subadditivity(&t, &plain, &grid)?),
            ("trivial Ancona", check_trivial_ancona(&t, &plain, &grid)?),
            ("Harnack", check_harnack(&t, &pairs, &grid)?),
        ];
        for (suite, r) in suites {
            out.check(r.violations == 0, format!("{name} {suite}: {} violations", r.violations));
        }
    }
    for k in [2, 3] {
        let (g, mu) = free(k);
        let t = TreeGreen::new(&mu, &g)?;
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for n in 1..6 {
            // {Aⁿb, AⁿB} | {aⁿb, aⁿB}, separated by a segment of length 2n
            let w = |s: &str| g.element(s);
            let (x, x2) = (w(&format!("{}b", "A".repeat(n)))?, w(&format!("{}B", "A".repeat(n)))?);
            let (y, y2) = (w(&format!("{}b", "a".repeat(n)))?, w(&format!("{}B", "a".repeat(n)))?);
            for r in [1.0, t.radius()] {
                let row = strong_ancona_probe(&t, &x, &x2, &y, &y2, r, 0.0)?;
                ok &= row.deviation <= row.width;
                worst = worst.max(row.deviation);
            }
        }
        out.check(ok, format!("free({k}) four-point deviation ≤ {worst:.1e} within width"));
    }
    Ok(out)
}

fn c12_derivative_identity() -> Outcome {
    let mut out = Checks::default();
    let (g, mu) = free(2);
    let t = TreeGreen::new(&mu, &g)?;
    let rep = derivative_identity_check(&t, 0.9 * t.radius(), 1e-4, 10)?;
    out.check(
        rep.within_budget,
        format!("free(2) {:.1e} within {:.1e}", rep.relative_discrepancy, rep.relative_budget),
    );
    let (z, zmu) = srw(GroupSpec::lattice(1));
    let s = SeriesGreen::new(&zmu, &z, 80, 0.0, None)?;
    let rep = derivative_identity_check(&s, 0.5, 1e-4, 12)?;
    // d/dr [r/√(1 − r²)] = (1 − r²)^(−3/2)
    let oracle = 0.75f64.powf(-1.5);
    let ok = rep.within_budget && (rep.finite_difference - oracle).abs() <= 1e-6 * oracle;
    out.check(ok, format!("Z {:.1e} within {:.1e}", rep.relative_discrepancy, rep.relative_budget));
    Ok(out)
}

fn c13_renewal() -> Outcome {
    let mut out = Checks::default();
    let mut rng = StdRng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..32 {
        // u_n θⁿ with θ < 1/2 keeps Σ_{n≥1} p_n below 1
        let theta = rng.random_range(0.05..0.5);
        let mut p = vec![1.0];
        p.extend((1..=200).map(|n| rng.random_range(1e-3..1.0) * f64::powi(theta, n)));
        let rep = renewal_first_return(&p, &vec![0.0; p.len()], 1.0, None, (1, 200), 1)?;
        let f = &rep.series.scaled;
        for n in 1..=200 {
            let terms: Vec<f64> = (1..=n).map(|k| f[k] * p[n - k]).collect();
            let scale: f64 = terms.iter().map(|t| t.abs()).sum::<f64>().max(p[n]);
            worst = worst.max((p[n] - terms.iter().sum::<f64>()).abs() / scale);
        }
    }
    out.check(worst <= 1e-12, format!("reconstruction rel err {worst:.1e}"));

    let (sys, c) = free_two_llt_series(2000)?;
    let big_r = free_radius(2);
    let gee = 1.0 / (1.0 - big_r * free_f(2, big_r));
    let target = 1.0 / (gee * gee);
    let rep = renewal_first_return(&c.scaled, &vec![0.0; c.scaled.len()], big_r, Some(green_ee(&sys, big_r)?), (500, 2000), 2)?;
    let dev = rep.ratios.iter().map(|&(_, q)| (q / target - 1.0).abs()).fold(0.0, f64::max);
    out.check(
        dev <= 0.05 && !rep.ratios.is_empty(),
        format!("f_n/p_n within {:.2}% of 1/9", 100.0 * dev),
    );
    Ok(out)
}

fn c14_cesaro() -> Outcome {
    let mut out = Checks::default();
    let (_, c) = free_two_llt_series(4000)?;
    let sum = |n: usize| (1..=n).map(|k| k as f64 * c.scaled[k]).sum::<f64>() / (n as f64).sqrt();
    let (a, b) = (sum(2000), sum(4000));
    let change = (b / a - 1.0).abs();
    out.check(change <= 0.05, format!("S_2000 {a:.5}, S_4000 {b:.5}, change {:.2}%", 100.0 * change));
    let rep = cesaro_check(&c.scaled, &[2000, 4000], 0.5)?;
    out.check((rep.points[1].2 - b).abs() <= 1e-9 * b, "library sums agree".to_string());
    Ok(out)
}

fn c15_estimators() -> Outcome {
    let mut out = Checks::default();
    let (g, mu) = free(2);
    let sys = BranchSystem::build(&mu, &g)?;
    // the word length moves +1 with probability 3/4 and −1 with 1/4 off e
    let v = 0.75 - 0.25;
    let est = escape_rate(&mu, &g, 400, 500, 15)?;
    out.check((est.mean - v).abs() <= 0.02, format!("escape rate {:.4}", est.mean));

    let big_r = radius_r(&sys)?.r;
    let e = g.identity();
    let log_f = |x: &hyperwalk::group::NormalForm| first_visit_exact(&sys, &g, big_r, &e, x).map(f64::ln);
    // log F_R(e,x) = |x|·log F_R(e,a)
    let oracle = v * free_f(2, free_radius(2)).ln();
    let c = green_cocycle_rate(&mu, &g, &log_f, 400, 500, 15)?;
    out.check(
        (c.mean - oracle).abs() <= 0.02 && (oracle + 0.2747).abs() < 1e-4,
        format!("cocycle rate {:.4} vs {oracle:.4}", c.mean),
    );
    out.check(c.excludes_zero(), format!("99% CI [{:.4}, {:.4}]", c.ci_low, c.ci_high));
    Ok(out)
}

fn c16_automata() -> Outcome {
    let mut out = Checks::default();
    for spec in [GroupSpec::free(2), GroupSpec::free_product(&[2, 3, 4])] {
        let name = format!("{spec:?}");
        let g = Group::new(spec)?;
        let aut = GeodesicAutomaton::build(&g, &BuildParams::default())?;
        let rep = aut.validate(&g, 8)?;
        out.check(rep.pass, format!("{name} valid to radius 8"));
    }
    let g = Group::new(GroupSpec::free(2))?;
    let aut = GeodesicAutomaton::build(&g, &BuildParams::default())?;
    let rep = aut.without_edge(3).validate(&g, 8)?;
    let named = rep.counterexamples.first().cloned().unwrap_or_default();
    out.check(!rep.pass && !named.is_empty(), format!("mutated automaton rejected: {named}"));
    Ok(out)
}

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn() -> Outcome,
    limit: Option<Duration>,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "lattice oracle", run: c1_lattice, limit: secs(10) },
        Criterion { id: 2, name: "tree coefficients", run: c2_tree_coefficients, limit: secs(60) },
        Criterion { id: 3, name: "spectral radius", run: c3_spectral_radius, limit: None },
        Criterion { id: 4, name: "Green values", run: c4_green_values, limit: None },
        Criterion { id: 5, name: "local limit", run: c5_llt, limit: secs(120) },
        Criterion { id: 6, name: "derivative singularity", run: c6_singularity, limit: None },
        Criterion { id: 7, name: "η scaling", run: c7_eta_scaling, limit: None },
        Criterion { id: 8, name: "sphere sums", run: c8_sphere_sums, limit: None },
        Criterion { id: 9, name: "pressure", run: c9_pressure, limit: None },
        Criterion { id: 10, name: "Jordan growth", run: c10_jordan, limit: None },
        Criterion { id: 11, name: "Ancona", run: c11_ancona, limit: None },
        Criterion { id: 12, name: "derivative identity", run: c12_derivative_identity, limit: None },
        Criterion { id: 13, name: "renewal", run: c13_renewal, limit: None },
        Criterion { id: 14, name: "Cesàro", run: c14_cesaro, limit: None },
        Criterion { id: 15, name: "escape and cocycle", run: c15_estimators, limit: secs(30) },
        Criterion { id: 16, name: "automaton validation", run: c16_automata, limit: None },
    ];
    // numeric arguments select criteria; harness flags are ignored
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(Ok(mut checks)) => {
                if let Some(limit) = c.limit {
                    checks.check(elapsed <= limit, format!("runtime limit {}s", limit.as_secs()));
                }
                if checks.failed.is_empty() {
                    (true, checks.passed.join("; "))
                } else {
                    (false, checks.failed.join("; "))
                }
            }
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panic: {msg}"))
            }
        };
        if !pass {
            failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {:<24} {verdict} [{:.1}s] {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
