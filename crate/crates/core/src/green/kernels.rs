use rayon::prelude::*;
use serde::Serialize;

use super::{GreenOracle, GreenValue, Interval};
use crate::error::{Error, Result};
use crate::group::NormalForm;
use crate::numeric::Dd;

/// F_r(x, y) = G_r(x, y)/G_r(y, y).
pub fn first_visit(oracle: &dyn GreenOracle, x: &NormalForm, y: &NormalForm, r: f64) -> Result<GreenValue> {
    if x == y {
        return Ok(GreenValue::exact(1.0, r));
    }
    let gxy = oracle.green(x, y, r)?.interval();
    let gyy = oracle.green(y, y, r)?.interval();
    Ok(GreenValue::from_interval(gxy.div(gyy)?, r))
}

/// H_r(x, y) = G_r(x, y)·G_r(y, x).
pub fn h_kernel(oracle: &dyn GreenOracle, x: &NormalForm, y: &NormalForm, r: f64) -> Result<GreenValue> {
    let a = oracle.green(x, y, r)?.interval();
    let b = if oracle.measure().is_symmetric() {
        a
    } else {
        oracle.green(y, x, r)?.interval()
    };
    Ok(GreenValue::from_interval(a.mul(b), r))
}

/// Σ_{x ∈ S_k} H_r(e, x) for k = 0..=k_max.
pub fn sphere_h_sums(oracle: &dyn GreenOracle, r: f64, k_max: usize) -> Result<Vec<GreenValue>> {
    let spheres = oracle.group().spheres(k_max)?;
    let e = oracle.group().identity();
    spheres
        .iter()
        .map(|sphere| {
            let values: Vec<Interval> = sphere
                .par_iter()
                .map(|x| h_kernel(oracle, &e, x, r).map(|v| v.interval()))
                .collect::<Result<_>>()?;
            // double-double sums keep spheres of ~10⁶ terms at f64 accuracy
            let sum = |end: fn(&Interval) -> f64| values.iter().fold(Dd::ZERO, |s, v| s + Dd::from_f64(end(v))).to_f64();
            let (lo, hi) = (sum(|v| v.lo), sum(|v| v.hi));
            let round = f64::EPSILON * hi * (sphere.len() as f64).log2().max(1.0);
            Ok(GreenValue::from_interval(
                Interval {
                    lo: (lo - round).max(0.0),
                    hi: hi + round,
                },
                r,
            ))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaPartial {
    pub r: f64,
    pub sphere_sums: Vec<GreenValue>,
    /// Σ_{k ≤ k_max} of the sphere-sum lower bounds.
    pub lower: f64,
    /// Geometric decay ratio fitted on the last sphere sums.
    pub decay_ratio: f64,
    /// Extrapolated tail beyond k_max; None when the decay is too slow.
    pub tail: Option<f64>,
    /// lower + interval widths + tail, when a tail is available.
    pub upper: Option<f64>,
}

/// Slowest decay ratio for which a tail is extrapolated.
const MAX_DECAY_RATIO: f64 = 1.0 - 1e-3;

/// η(r) = Σ_z G_r(e,z)·G_r(z,e) summed over spheres up to k_max, with a tail
/// from the per-sphere geometric decay of the last three ratios.
pub fn eta_partial(oracle: &dyn GreenOracle, r: f64, k_max: usize) -> Result<EtaPartial> {
    let sums = sphere_h_sums(oracle, r, k_max)?;
    let lower: f64 = sums.iter().map(|s| s.value).sum();
    let widths: f64 = sums.iter().map(|s| s.tail_bound).sum();
    let mids: Vec<f64> = sums.iter().map(|s| s.value + 0.5 * s.tail_bound).collect();
    let decay_ratio = if k_max >= 3 && mids[k_max - 3] > 0.0 {
        (mids[k_max] / mids[k_max - 3]).powf(1.0 / 3.0)
    } else if k_max >= 1 && mids[k_max - 1] > 0.0 {
        mids[k_max] / mids[k_max - 1]
    } else {
        0.0
    };
    let (tail, upper) = if k_max == 0 && r > 0.0 {
        (None, None)
    } else if decay_ratio < MAX_DECAY_RATIO {
        let last = sums[k_max].upper();
        let t = last * decay_ratio / (1.0 - decay_ratio);
        (Some(t), Some(lower + widths + t))
    } else {
        (None, None)
    };
    Ok(EtaPartial {
        r,
        sphere_sums: sums,
        lower,
        decay_ratio,
        tail,
        upper,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivativeReport {
    pub r: f64,
    pub h: f64,
    /// Centered difference of r·G_r(e,e).
    pub finite_difference: f64,
    /// Σ_z G_r(e,z)G_r(z,e), midpoint of the truncated interval.
    pub eta: f64,
    pub relative_discrepancy: f64,
    /// Relative budget: h² term + truncation + interval widths + rounding.
    pub relative_budget: f64,
    pub within_budget: bool,
}

/// Compare d/dr (r·G_r(e,e)) with η(r).
pub fn derivative_identity_check(oracle: &dyn GreenOracle, r: f64, h: f64, k_max: usize) -> Result<DerivativeReport> {
    if r - 2.0 * h <= 0.0 || r + 2.0 * h >= oracle.radius() {
        return Err(Error::Domain(format!(
            "r ± 2h = [{}, {}] must lie in (0, R)",
            r - 2.0 * h,
            r + 2.0 * h
        )));
    }
    let rg = |t: f64| -> Result<Interval> {
        let g = oracle.green_ee(t)?.interval();
        Ok(Interval {
            lo: t * g.lo,
            hi: t * g.hi,
        })
    };
    let (p1, m1, p2, m2) = (rg(r + h)?, rg(r - h)?, rg(r + 2.0 * h)?, rg(r - 2.0 * h)?);
    let d_h = (p1.mid() - m1.mid()) / (2.0 * h);
    let d_2h = (p2.mid() - m2.mid()) / (4.0 * h);
    // Richardson: D_h − D' ≈ (D_2h − D_h)/3
    let fd_err = (d_2h - d_h).abs() / 3.0;
    let width_err = (p1.width() + m1.width()) / (2.0 * h);
    let rounding = 8.0 * f64::EPSILON * p1.hi.max(m1.hi) / h;
    let eta = eta_partial(oracle, r, k_max)?;
    let widths: f64 = eta.sphere_sums.iter().map(|s| s.tail_bound).sum();
    let (eta_mid, trunc) = match eta.tail {
        Some(t) => (eta.lower + t + 0.5 * widths, t + widths),
        None => (eta.lower + 0.5 * widths, f64::INFINITY),
    };
    let disc = (d_h - eta_mid).abs() / eta_mid;
    let budget = (fd_err + width_err + rounding + trunc) / eta_mid;
    Ok(DerivativeReport {
        r,
        h,
        finite_difference: d_h,
        eta: eta_mid,
        relative_discrepancy: disc,
        relative_budget: budget,
        within_budget: disc <= budget,
    })
}

/// K_{r,y}(x) = G_r(x, y)/G_r(e, y).
pub fn martin_kernel(oracle: &dyn GreenOracle, x: &NormalForm, y: &NormalForm, r: f64) -> Result<Interval> {
    let e = oracle.group().identity();
    oracle.green(x, y, r)?.interval().div(oracle.green(&e, y, r)?.interval())
}

#[derive(Clone, Debug, Serialize)]
pub struct MartinProbe {
    /// (depth, kernel interval) along the ray.
    pub values: Vec<(usize, Interval)>,
    /// |K_{i+1} − K_i| between midpoints.
    pub differences: Vec<f64>,
    /// Interval widths of consecutive pairs, for comparison.
    pub widths: Vec<f64>,
}

/// Evaluate K_{r,y_i}(x) along the points y_i = ray[depth_i].
pub fn martin_cauchy_probe(
    oracle: &dyn GreenOracle,
    x: &NormalForm,
    ray: &[NormalForm],
    r: f64,
    depths: &[usize],
) -> Result<MartinProbe> {
    let values: Vec<(usize, Interval)> = depths
        .iter()
        .map(|&d| {
            let y = ray
                .get(d)
                .ok_or_else(|| Error::Precondition(format!("ray has no point at depth {d}")))?;
            Ok((d, martin_kernel(oracle, x, y, r)?))
        })
        .collect::<Result<_>>()?;
    let differences = values.windows(2).map(|w| (w[1].1.mid() - w[0].1.mid()).abs()).collect();
    let widths = values.windows(2).map(|w| w[1].1.width() + w[0].1.width()).collect();
    Ok(MartinProbe {
        values,
        differences,
        widths,
    })
}
