use serde::Serialize;

use super::FitResult;
use crate::error::{Error, Result};
use crate::green::{GreenOracle, Interval};
use crate::group::NormalForm;
use crate::numeric::lstsq;
use crate::tree_exact::{eta_exact, radius_r, triple_sum_exact, BranchSystem};

/// Where the moments η(r) = Σ (n+1) p_n rⁿ and
/// T(r) = Σ (n+1)(n+2)/2 · p_n rⁿ come from.
#[derive(Clone, Copy, Debug)]
pub enum MomentSource<'a> {
    /// Closed forms on tree models.
    Tree(&'a BranchSystem),
    /// Return probabilities p_0..p_N with p_n ≤ rho_upperⁿ beyond N.
    Series { p: &'a [f64], rho_upper: f64 },
}

/// Relative width attached to closed-form moments.
const TREE_MOMENT_WIDTH: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct Moments {
    pub r: f64,
    pub eta: Interval,
    pub triple: Interval,
}

impl MomentSource<'_> {
    pub fn radius(&self) -> Result<f64> {
        match self {
            MomentSource::Tree(sys) => Ok(radius_r(sys)?.r),
            MomentSource::Series { rho_upper, .. } => Ok(1.0 / rho_upper),
        }
    }

    pub fn moments(&self, r: f64) -> Result<Moments> {
        match *self {
            MomentSource::Tree(sys) => {
                let widen = |v: f64| Interval {
                    lo: v * (1.0 - TREE_MOMENT_WIDTH),
                    hi: v * (1.0 + TREE_MOMENT_WIDTH),
                };
                Ok(Moments {
                    r,
                    eta: widen(eta_exact(sys, r)?),
                    triple: widen(triple_sum_exact(sys, r)?),
                })
            }
            MomentSource::Series { p, rho_upper } => series_moments(p, rho_upper, r),
        }
    }
}

fn series_moments(p: &[f64], rho_upper: f64, r: f64) -> Result<Moments> {
    let q = r * rho_upper;
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Divergence(format!("r·ρ_upper = {q} is not summable")));
    }
    let (mut eta, mut triple) = (0.0, 0.0);
    for (n, &pn) in p.iter().enumerate() {
        let w = pn * r.powi(n as i32);
        eta += (n + 1) as f64 * w;
        triple += ((n + 1) * (n + 2)) as f64 / 2.0 * w;
    }
    // tails Σ_{n>N} (n+1) qⁿ and Σ_{n>N} C(n+2,2) qⁿ, summed until the
    // geometric remainder is below one ulp of the running total
    let (mut te, mut tt) = (0.0, 0.0);
    let mut n = p.len();
    loop {
        let qn = q.powi(n as i32);
        let (a, b) = ((n + 1) as f64 * qn, ((n + 1) * (n + 2)) as f64 / 2.0 * qn);
        te += a;
        tt += b;
        // once the term ratio is below q' < 1, the rest is at most term·q'/(1−q')
        let ratio = q * (n + 3) as f64 / (n + 1) as f64;
        if ratio < 1.0 && b * ratio / (1.0 - ratio) < f64::EPSILON * tt.max(triple) {
            te += a * ratio / (1.0 - ratio);
            tt += b * ratio / (1.0 - ratio);
            break;
        }
        n += 1;
        if n > 10_000_000 {
            return Err(Error::Resource("moment tail does not settle".into()));
        }
    }
    let round = |v: f64| v * f64::EPSILON * p.len() as f64;
    Ok(Moments {
        r,
        eta: Interval {
            lo: eta - round(eta),
            hi: eta + te + round(eta),
        },
        triple: Interval {
            lo: triple - round(triple),
            hi: triple + tt + round(triple),
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CrudeRatio {
    pub moments: Moments,
    /// T(r)/η(r)³.
    pub ratio: Interval,
}

/// Σ_{x,y} G_r(e,y)G_r(y,x)G_r(x,e) / η(r)³.
pub fn crude_ratio(source: &MomentSource, r: f64) -> Result<CrudeRatio> {
    let m = source.moments(r)?;
    let cube = m.eta.mul(m.eta).mul(m.eta);
    let ratio = m.triple.div(cube)?;
    Ok(CrudeRatio { moments: m, ratio })
}

/// Lower bound for the triple sum from the pairs (x, y) in the ball of
/// radius k_max.
pub fn triple_sum_direct(oracle: &dyn GreenOracle, r: f64, k_max: usize) -> Result<f64> {
    let group = oracle.group();
    let ball = group.ball(k_max)?;
    let e = group.identity();
    let to_e: Vec<f64> = ball.iter().map(|x| oracle.green(x, &e, r).map(|v| v.value)).collect::<Result<_>>()?;
    let from_e: Vec<f64> = ball.iter().map(|y| oracle.green(&e, y, r).map(|v| v.value)).collect::<Result<_>>()?;
    let mut terms = Vec::with_capacity(ball.len() * ball.len());
    for (j, y) in ball.iter().enumerate() {
        for (i, x) in ball.iter().enumerate() {
            terms.push(from_e[j] * oracle.green(y, x, r)?.value * to_e[i]);
        }
    }
    terms.sort_by(|a, b| a.total_cmp(b));
    let s: f64 = terms.iter().sum();
    Ok(s * (1.0 - f64::EPSILON * terms.len() as f64))
}

#[derive(Clone, Debug, Serialize)]
pub struct TripleSumReport {
    /// (r, ĉ(r)) with ĉ = T/η³ at interval midpoints.
    pub points: Vec<(f64, f64)>,
    /// Regression of log ĉ on log(R − r); a flat profile has exponent ≈ 0.
    pub fit: FitResult,
    /// max/min − 1 of ĉ over the last `tail` grid points.
    pub variation: f64,
}

/// ĉ(r) = T(r)/η(r)³ along a grid, with its variation over the last
/// `tail` points.
pub fn triple_sum_ratio(source: &MomentSource, r_grid: &[f64], tail: usize) -> Result<TripleSumReport> {
    if r_grid.len() < 3 || tail < 2 || tail > r_grid.len() {
        return Err(Error::InsufficientData("need at least 3 grid points and 2 ≤ tail ≤ grid size".into()));
    }
    let big_r = source.radius()?;
    let points: Vec<(f64, f64)> = r_grid
        .iter()
        .map(|&r| crude_ratio(source, r).map(|c| (r, c.ratio.mid())))
        .collect::<Result<_>>()?;
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::Precision("non-positive ratio estimate".into()));
    }
    let rows: Vec<Vec<f64>> = points.iter().map(|&(r, _)| vec![1.0, (big_r - r).ln()]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (c, residual) = lstsq(&rows, &y)?;
    let last = &points[points.len() - tail..];
    let max = last.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let min = last.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    Ok(TripleSumReport {
        fit: FitResult {
            exponent: c[1],
            amplitude: c[0].exp(),
            residual,
            grid: format!("{} points", points.len()),
            points: points.iter().map(|&(r, v)| (big_r - r, v)).collect(),
        },
        points,
        variation: max / min - 1.0,
    })
}

/// Φ_r(x) = Σ_y G_r(e,y)G_r(y,x)/G_r(e,x) = 1 + r·∂_r log G_r(e,x),
/// with the derivative from a fourth-order centered difference.
pub fn phi_r(oracle: &dyn GreenOracle, x: &NormalForm, r: f64, h: f64) -> Result<f64> {
    let e = oracle.group().identity();
    let lg = |t: f64| oracle.green(&e, x, t).map(|v| (v.value + 0.5 * v.tail_bound).ln());
    let d = (8.0 * (lg(r + h)? - lg(r - h)?) - (lg(r + 2.0 * h)? - lg(r - 2.0 * h)?)) / (12.0 * h);
    Ok(1.0 + r * d)
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiBound {
    pub r: f64,
    /// (|x|, Φ_r(x)/((1+|x|)·η(r))) per sample.
    pub samples: Vec<(usize, f64)>,
    pub max_ratio: f64,
}

/// Spot check of Φ_r(x) ≤ C(1+|x|)·η(r); the report records the largest
/// observed C.
pub fn phi_bound_check(oracle: &dyn GreenOracle, eta: f64, xs: &[NormalForm], r: f64, h: f64) -> Result<PhiBound> {
    let samples: Vec<(usize, f64)> = xs
        .iter()
        .map(|x| phi_r(oracle, x, r, h).map(|v| (x.len(), v / ((1.0 + x.len() as f64) * eta))))
        .collect::<Result<_>>()?;
    let max_ratio = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(PhiBound { r, samples, max_ratio })
}
