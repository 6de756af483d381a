//! Scaling fits near the radius of convergence, local limit checks and the
//! renewal inverse.

mod moments;
mod nu;
mod renewal;

pub use moments::{
    crude_ratio, phi_bound_check, phi_r, triple_sum_direct, triple_sum_ratio, CrudeRatio, MomentSource, Moments,
    PhiBound, TripleSumReport,
};
pub use nu::{nu_convergence_probe, nu_functional, NuFunction, NuProbe, NuValue};
pub use renewal::{renewal_first_return, reconstruct, RenewalReport, RenewalSeries};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::lstsq;
use crate::walk::Parity;

/// A power-law fit in log space.
#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub exponent: f64,
    pub amplitude: f64,
    /// RMS residual of the log-scale regression.
    pub residual: f64,
    pub grid: String,
    /// The (abscissa, value) pairs that were fitted.
    pub points: Vec<(f64, f64)>,
}

/// η samples on r_j = R(1 − 2^(−j)).
#[derive(Clone, Debug)]
pub struct EtaSamples {
    pub big_r: f64,
    /// (r, η(r)) pairs.
    pub points: Vec<(f64, f64)>,
    pub amenable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaScaling {
    pub fit: FitResult,
    /// max/min of η(r)·√(R − r) over the grid.
    pub plateau_ratio: f64,
}

/// Fit η(r) ~ A·(R − r)^(−1/2).
///
/// The regression of log η on log(R − r) includes √(R − r) and (R − r)
/// columns for the analytic corrections of a square-root singularity.
pub fn eta_scaling_fit(samples: &EtaSamples) -> Result<EtaScaling> {
    if samples.amenable {
        return Err(Error::Precondition(
            "η scaling is only meaningful for non-amenable groups".into(),
        ));
    }
    if samples.points.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} grid points; need at least 8",
            samples.points.len()
        )));
    }
    let pts: Vec<(f64, f64)> = samples.points.iter().map(|&(r, e)| (samples.big_r - r, e)).collect();
    if pts.iter().any(|&(h, e)| h <= 0.0 || !(e > 0.0) || !e.is_finite()) {
        return Err(Error::Domain("η samples must be finite and positive with r < R".into()));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|&(h, _)| vec![1.0, h.ln(), h.sqrt(), h]).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (c, residual) = lstsq(&rows, &y)?;
    let scaled: Vec<f64> = pts.iter().map(|&(h, e)| e * h.sqrt()).collect();
    let max = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let min = scaled.iter().cloned().fold(f64::MAX, f64::min);
    Ok(EtaScaling {
        fit: FitResult {
            exponent: c[1],
            amplitude: c[0].exp(),
            residual,
            grid: format!("{} points r_j = R(1 - 2^-j)", pts.len()),
            points: pts,
        },
        plateau_ratio: max / min,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParitySelect {
    Even,
    Odd,
}

#[derive(Clone, Debug)]
pub struct LltOptions {
    pub n_min: usize,
    pub n_max: usize,
    /// Required for period-2 walks.
    pub parity: Option<ParitySelect>,
    /// Range for the plateau check of p_n Rⁿ n^β; defaults to the fit range.
    pub plateau_range: Option<(usize, usize)>,
    /// β in the plateau check.
    pub template_exponent: f64,
}

impl LltOptions {
    pub fn new(n_min: usize, n_max: usize, parity: Option<ParitySelect>) -> Self {
        LltOptions {
            n_min,
            n_max,
            parity,
            plateau_range: None,
            template_exponent: 1.5,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LltReport {
    pub fit: FitResult,
    /// max/min − 1 of p_n Rⁿ n^β over the plateau range.
    pub plateau_variation: f64,
    pub template_exponent: f64,
}

fn select(
    len: usize,
    lo: usize,
    hi: usize,
    parity: Option<ParitySelect>,
) -> impl Iterator<Item = usize> {
    (lo.max(1)..=hi.min(len.saturating_sub(1))).filter(move |n| match parity {
        Some(ParitySelect::Even) => n % 2 == 0,
        Some(ParitySelect::Odd) => n % 2 == 1,
        None => true,
    })
}

/// Fit log(p_n Rⁿ) against log n. `scaled[n]` holds p_n Rⁿ.
pub fn llt_fit(scaled: &[f64], walk_parity: Parity, opts: &LltOptions) -> Result<LltReport> {
    if walk_parity == Parity::Period2 && opts.parity.is_none() {
        return Err(Error::Precondition(
            "period-2 walk: select even or odd n before fitting".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = select(scaled.len(), opts.n_min, opts.n_max, opts.parity)
        .filter(|&n| scaled[n] > 0.0)
        .map(|n| (n as f64, scaled[n]))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} usable coefficients in [{}, {}]",
            pts.len(),
            opts.n_min,
            opts.n_max
        )));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|&(n, _)| vec![1.0, n.ln()]).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (c, residual) = lstsq(&rows, &y)?;
    let (plo, phi) = opts.plateau_range.unwrap_or((opts.n_min, opts.n_max));
    let plateau: Vec<f64> = select(scaled.len(), plo, phi, opts.parity)
        .filter(|&n| scaled[n] > 0.0)
        .map(|n| scaled[n] * (n as f64).powf(opts.template_exponent))
        .collect();
    if plateau.is_empty() {
        return Err(Error::InsufficientData("empty plateau range".into()));
    }
    let max = plateau.iter().cloned().fold(f64::MIN, f64::max);
    let min = plateau.iter().cloned().fold(f64::MAX, f64::min);
    Ok(LltReport {
        fit: FitResult {
            exponent: c[1],
            amplitude: c[0].exp(),
            residual,
            grid: format!(
                "n in [{}, {}]{}",
                opts.n_min,
                opts.n_max,
                match opts.parity {
                    Some(ParitySelect::Even) => " even",
                    Some(ParitySelect::Odd) => " odd",
                    None => "",
                }
            ),
            points: pts,
        },
        plateau_variation: max / min - 1.0,
        template_exponent: opts.template_exponent,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CesaroReport {
    /// (n, S_n, S_n/n^γ) with S_n = Σ_{k≤n} k Rᵏ p_k.
    pub points: Vec<(usize, f64, f64)>,
    /// Largest relative change of S_n/n^γ between consecutive points.
    pub max_relative_change: f64,
    /// Growth exponent of S_n from the first and last points.
    pub growth_exponent: f64,
    pub template_exponent: f64,
    /// Set when the growth exponent is off the template by more than 0.1.
    pub mismatch: bool,
    pub nondecreasing: bool,
}

/// Partial sums Σ_{k≤n} k Rᵏ p_k against n^γ (γ = 1/2 for the template).
pub fn cesaro_check(scaled: &[f64], n_list: &[usize], template_exponent: f64) -> Result<CesaroReport> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() || *ns.last().unwrap() >= scaled.len() {
        return Err(Error::InsufficientData(format!(
            "series of length {} does not reach the requested n",
            scaled.len()
        )));
    }
    let mut partial = Vec::with_capacity(scaled.len());
    let mut s = 0.0;
    let mut nondecreasing = true;
    for (k, &v) in scaled.iter().enumerate() {
        let t = k as f64 * v;
        if t < 0.0 {
            nondecreasing = false;
        }
        s += t;
        partial.push(s);
    }
    let points: Vec<(usize, f64, f64)> = ns
        .iter()
        .map(|&n| (n, partial[n], partial[n] / (n as f64).powf(template_exponent)))
        .collect();
    let max_relative_change = points
        .windows(2)
        .map(|w| (w[1].2 / w[0].2 - 1.0).abs())
        .fold(0.0, f64::max);
    let (first, last) = (points[0], points[points.len() - 1]);
    let growth_exponent = if points.len() > 1 && first.1 > 0.0 && first.0 > 0 {
        (last.1 / first.1).ln() / (last.0 as f64 / first.0 as f64).ln()
    } else {
        f64::NAN
    };
    Ok(CesaroReport {
        points,
        max_relative_change,
        growth_exponent,
        template_exponent,
        mismatch: (growth_exponent - template_exponent).abs() > 0.1,
        nondecreasing,
    })
}
