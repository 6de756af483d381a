use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{first_visit, GreenOracle, Interval};
use crate::asymptotics::FitResult;
use crate::error::{Error, Result};
use crate::group::{gromov_product, random_element, Group, NormalForm};
use crate::numeric::lstsq;
use crate::walk::FiniteMeasure;

#[derive(Clone, Debug, Serialize)]
pub struct AnconaRow {
    pub config: usize,
    pub r: f64,
    /// G_r(x,z)/(G_r(x,y)·G_r(y,z)).
    pub ratio: Interval,
    /// ratio·G_r(y,y); equal to 1 on trees when y lies on [x, z].
    pub normalized: Interval,
    /// Trivial direction: ratio ≥ 1/G_r(e,e) up to interval slack.
    pub trivial_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnconaReport {
    /// (x, y, z) as formatted words.
    pub configurations: Vec<[String; 3]>,
    pub r_grid: Vec<f64>,
    pub rows: Vec<AnconaRow>,
    /// Largest upper end of the ratio over all rows.
    pub supremum: f64,
    /// Largest |normalized − 1| over all rows, measured from the far end.
    pub normalized_deviation: f64,
    pub trivial_violations: usize,
}

impl AnconaReport {
    fn from_rows(configurations: Vec<[String; 3]>, r_grid: &[f64], rows: Vec<AnconaRow>) -> Self {
        let supremum = rows.iter().map(|r| r.ratio.hi).fold(0.0, f64::max);
        let normalized_deviation = rows
            .iter()
            .map(|r| (r.normalized.lo - 1.0).abs().max((r.normalized.hi - 1.0).abs()))
            .fold(0.0, f64::max);
        let trivial_violations = rows.iter().filter(|r| !r.trivial_ok).count();
        AnconaReport {
            configurations,
            r_grid: r_grid.to_vec(),
            rows,
            supremum,
            normalized_deviation,
            trivial_violations,
        }
    }
}

fn ancona_rows(
    oracle: &dyn GreenOracle,
    config: usize,
    (x, y, z): (&NormalForm, &NormalForm, &NormalForm),
    r_grid: &[f64],
    threshold: f64,
) -> Result<Vec<AnconaRow>> {
    let group = oracle.group();
    // (x|z)_y is within δ of the distance from y to a geodesic [x, z]
    let off = gromov_product(group, x, z, y);
    if off > threshold {
        return Err(Error::Precondition(format!(
            "y is {off} away from a geodesic from x to z (threshold {threshold})"
        )));
    }
    r_grid
        .iter()
        .map(|&r| {
            let gxz = oracle.green(x, z, r)?.interval();
            let gxy = oracle.green(x, y, r)?.interval();
            let gyz = oracle.green(y, z, r)?.interval();
            let gyy = oracle.green(y, y, r)?.interval();
            let gee = oracle.green_ee(r)?.interval();
            let ratio = gxz.div(gxy.mul(gyz))?;
            let normalized = ratio.mul(gyy);
            Ok(AnconaRow {
                config,
                r,
                ratio,
                normalized,
                trivial_ok: ratio.hi * gee.hi >= 1.0,
            })
        })
        .collect()
}

/// Ancona ratio for one triple over an r grid. `threshold` bounds the
/// distance from y to a geodesic [x, z]; 2δ + 1 is the usual choice.
pub fn ancona_ratio(
    oracle: &dyn GreenOracle,
    x: &NormalForm,
    y: &NormalForm,
    z: &NormalForm,
    r_grid: &[f64],
    threshold: f64,
) -> Result<AnconaReport> {
    let g = oracle.group();
    let rows = ancona_rows(oracle, 0, (x, y, z), r_grid, threshold)?;
    Ok(AnconaReport::from_rows(vec![[g.format(x), g.format(y), g.format(z)]], r_grid, rows))
}

/// Ancona ratios for a batch of triples.
pub fn ancona_report(
    oracle: &dyn GreenOracle,
    triples: &[(NormalForm, NormalForm, NormalForm)],
    r_grid: &[f64],
    threshold: f64,
) -> Result<AnconaReport> {
    let g = oracle.group();
    let mut rows = Vec::new();
    let mut configs = Vec::new();
    for (i, (x, y, z)) in triples.iter().enumerate() {
        rows.extend(ancona_rows(oracle, i, (x, y, z), r_grid, threshold)?);
        configs.push([g.format(x), g.format(y), g.format(z)]);
    }
    Ok(AnconaReport::from_rows(configs, r_grid, rows))
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongAnconaRow {
    pub r: f64,
    /// Length of the segment separating {x, x'} from {y, y'}.
    pub separation: f64,
    /// G_r(x,y)G_r(x',y') / (G_r(x',y)G_r(x,y')).
    pub ratio: Interval,
    /// |mid(ratio) − 1|.
    pub deviation: f64,
    pub width: f64,
}

/// Four-point ratio for the split {x, x'} | {y, y'}.
///
/// The configuration must be δ-tree-like for that split: the pair sum
/// d(x,x') + d(y,y') is the smallest of the three, and the two others differ
/// by at most 2·delta_tol.
pub fn strong_ancona_probe(
    oracle: &dyn GreenOracle,
    x: &NormalForm,
    x2: &NormalForm,
    y: &NormalForm,
    y2: &NormalForm,
    r: f64,
    delta_tol: f64,
) -> Result<StrongAnconaRow> {
    let g = oracle.group();
    let d = |a: &NormalForm, b: &NormalForm| g.distance(a, b) as f64;
    let inner = d(x, x2) + d(y, y2);
    let (s1, s2) = (d(x, y) + d(x2, y2), d(x, y2) + d(x2, y));
    let degenerate = x == x2 || y == y2;
    if !degenerate && (inner > s1.min(s2) || (s1 - s2).abs() > 2.0 * delta_tol) {
        return Err(Error::Precondition(
            "points do not form a tree-like configuration split as {x, x'} | {y, y'}".into(),
        ));
    }
    let separation = 0.5 * (s1.min(s2) - inner);
    let num = oracle.green(x, y, r)?.interval().mul(oracle.green(x2, y2, r)?.interval());
    let den = oracle.green(x2, y, r)?.interval().mul(oracle.green(x, y2, r)?.interval());
    let ratio = if degenerate { Interval::point(1.0) } else { num.div(den)? };
    Ok(StrongAnconaRow {
        r,
        separation,
        ratio,
        deviation: (ratio.mid() - 1.0).abs(),
        width: ratio.width(),
    })
}

/// Regress log deviation on separation; the exponent is the slope.
/// None when fewer than two rows have a positive deviation.
pub fn decay_fit(rows: &[StrongAnconaRow]) -> Option<FitResult> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.deviation > 0.0)
        .map(|r| (r.separation, r.deviation))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let design: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0, p.0]).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (c, residual) = lstsq(&design, &y).ok()?;
    Some(FitResult {
        exponent: c[1],
        amplitude: c[0].exp(),
        residual,
        grid: format!("{} separations", pts.len()),
        points: pts,
    })
}

/// Random triples with entries in the ball of the given radius.
pub fn sample_triples(group: &Group, radius: usize, count: usize, seed: u64) -> Vec<(NormalForm, NormalForm, NormalForm)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                random_element(group, radius, &mut rng),
                random_element(group, radius, &mut rng),
                random_element(group, radius, &mut rng),
            )
        })
        .collect()
}

/// Random triples (x, y, z) with y on the geodesic from x to z read off the
/// normal form of x⁻¹z. On free products y sits between syllables, so it
/// separates x from z in the Cayley graph.
pub fn sample_geodesic_triples(
    group: &Group,
    radius: usize,
    count: usize,
    seed: u64,
) -> Vec<(NormalForm, NormalForm, NormalForm)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = random_element(group, radius, &mut rng);
            let z = random_element(group, radius, &mut rng);
            let w = group.mul_unchecked(&group.inv(&x), &z);
            let l = w.letters();
            let cuts: Vec<usize> = (0..=l.len())
                .filter(|&k| {
                    if k == 0 || k == l.len() || !group.is_free_product() {
                        return true;
                    }
                    group.letter_factor(l[k - 1]).map(|f| f.0) != group.letter_factor(l[k]).map(|f| f.0)
                })
                .collect();
            let k = cuts[rng.random_range(0..cuts.len())];
            let prefix = group.normalize(&l[..k]).expect("prefix of a normal form");
            let y = group.mul_unchecked(&x, &prefix);
            (x, y, z)
        })
        .collect()
}

/// Outcome of an inequality suite. `worst_margin` is the smallest value of
/// (right side upper end) − (left side lower end); negative means a violation.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub checked: usize,
    pub violations: usize,
    pub worst_margin: f64,
}

impl PropertyReport {
    fn new() -> Self {
        PropertyReport {
            checked: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, margin: f64) {
        self.checked += 1;
        if margin < 0.0 {
            self.violations += 1;
        }
        self.worst_margin = self.worst_margin.min(margin);
    }
}

/// F_r(x,y)·F_r(y,z) ≤ F_r(x,z).
pub fn check_subadditivity(
    oracle: &dyn GreenOracle,
    triples: &[(NormalForm, NormalForm, NormalForm)],
    r_grid: &[f64],
) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new();
    for &r in r_grid {
        for (x, y, z) in triples {
            let lhs = first_visit(oracle, x, y, r)?.interval().mul(first_visit(oracle, y, z, r)?.interval());
            let rhs = first_visit(oracle, x, z, r)?.interval();
            rep.record(rhs.hi - lhs.lo);
        }
    }
    Ok(rep)
}

/// G_r(x,y)·G_r(y,z) ≤ G_r(e,e)·G_r(x,z).
pub fn check_trivial_ancona(
    oracle: &dyn GreenOracle,
    triples: &[(NormalForm, NormalForm, NormalForm)],
    r_grid: &[f64],
) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new();
    for &r in r_grid {
        let gee = oracle.green_ee(r)?.upper();
        for (x, y, z) in triples {
            let lhs = oracle.green(x, y, r)?.interval().mul(oracle.green(y, z, r)?.interval());
            let rhs = gee * oracle.green(x, z, r)?.upper();
            rep.record(rhs - lhs.lo);
        }
    }
    Ok(rep)
}

/// C(r) = 1/(r·min μ) over the support. One step x → xs has weight r·μ(s),
/// so G_r(x,z) ≥ r·μ(s)·G_r(xs,z); the reverse needs s⁻¹ in the support.
pub fn harnack_constant(mu: &FiniteMeasure, group: &Group, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Domain("Harnack constants need r > 0".into()));
    }
    let mut min = f64::INFINITY;
    for (s, p) in mu.atoms() {
        let back = mu.weight(&group.inv(s));
        if back <= 0.0 {
            return Err(Error::Precondition(format!(
                "support is not closed under inversion at {}",
                group.format(s)
            )));
        }
        min = min.min(*p).min(back);
    }
    Ok(1.0 / (r * min))
}

/// C⁻¹ ≤ G_r(x,z)/G_r(xs,z) ≤ C for every support element s.
pub fn check_harnack(
    oracle: &dyn GreenOracle,
    pairs: &[(NormalForm, NormalForm)],
    r_grid: &[f64],
) -> Result<PropertyReport> {
    let group = oracle.group();
    let mu = oracle.measure();
    let mut rep = PropertyReport::new();
    for &r in r_grid {
        let c = harnack_constant(mu, group, r)?;
        for (x, z) in pairs {
            let gxz = oracle.green(x, z, r)?.interval();
            for (s, _) in mu.atoms() {
                let y = group.mul(x, s)?;
                let gyz = oracle.green(&y, z, r)?.interval();
                // C·G(y,z) − G(x,z) ≥ 0 and C·G(x,z) − G(y,z) ≥ 0
                rep.record((c * gyz.hi - gxz.lo).min(c * gxz.hi - gyz.lo));
            }
        }
    }
    Ok(rep)
}
