use serde::Serialize;

use super::{convolution_powers, convolve, DistributionCache, FiniteMeasure, Parity, SparseDistribution, DEFAULT_SUPPORT_CAP};
use crate::error::{Error, Result};
use crate::group::Group;
use crate::numeric::lstsq;

/// Return probabilities p_n(e,e) for n = 0..=n_max. Each entry is a lower
/// bound; the true value lies in [value, value + error].
#[derive(Clone, Debug, Serialize)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub parity: Parity,
}

impl ReturnSeries {
    pub fn new(values: Vec<f64>, parity: Parity) -> Self {
        let errors = vec![0.0; values.len()];
        ReturnSeries {
            values,
            errors,
            parity,
        }
    }

    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

/// Σ_x a(x)·b(x⁻¹) with its one-sided error from pruning.
fn pair_sum(group: &Group, a: &SparseDistribution, b: &SparseDistribution) -> (f64, f64) {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut terms: Vec<f64> = small
        .iter()
        .filter_map(|(x, p)| {
            let q = large.get(&group.inv(x));
            (q > 0.0).then_some(p * q)
        })
        .collect();
    terms.sort_by(|x, y| x.total_cmp(y));
    let value: f64 = terms.iter().sum();
    let (ea, eb) = (a.pruned_mass(), b.pruned_mass());
    let err = ea * (b.max_mass() + eb) + eb * (a.max_mass() + ea) + ea * eb;
    (value, err)
}

/// p_n(e,e) for n ≤ n_max using only ⌈n_max/2⌉ convolutions:
/// p_{2k} = Σ_x d_k(x) d_k(x⁻¹) and p_{2k+1} = Σ_x d_{k+1}(x) d_k(x⁻¹).
pub fn return_sequence(
    mu: &FiniteMeasure,
    group: &Group,
    n_max: usize,
    prune_eps: f64,
) -> Result<ReturnSeries> {
    return_sequence_capped(mu, group, n_max, prune_eps, DEFAULT_SUPPORT_CAP)
}

pub fn return_sequence_capped(
    mu: &FiniteMeasure,
    group: &Group,
    n_max: usize,
    prune_eps: f64,
    cap: usize,
) -> Result<ReturnSeries> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    let d = convolution_powers(mu, group, n_max.div_ceil(2), prune_eps, cap)?;
    Ok(from_powers(mu, group, n_max, &d))
}

/// As [`return_sequence`], reading and filling a distribution cache. Also
/// returns the cache keys that were read or written.
pub fn return_sequence_cached(
    mu: &FiniteMeasure,
    group: &Group,
    n_max: usize,
    prune_eps: f64,
    cache: &DistributionCache,
) -> Result<(ReturnSeries, Vec<String>)> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    let mut d = vec![SparseDistribution::delta(group)];
    let mut keys = Vec::new();
    for k in 1..=n_max.div_ceil(2) {
        let next = match cache.load(group, mu.hash(), k, prune_eps)? {
            Some(hit) => hit,
            None => {
                let fresh = convolve(&d[k - 1], mu, group, prune_eps, DEFAULT_SUPPORT_CAP)?;
                cache.store(group, mu.hash(), prune_eps, &fresh)?;
                fresh
            }
        };
        keys.push(DistributionCache::key(group.hash(), mu.hash(), k, prune_eps));
        d.push(next);
    }
    Ok((from_powers(mu, group, n_max, &d), keys))
}

fn from_powers(mu: &FiniteMeasure, group: &Group, n_max: usize, d: &[SparseDistribution]) -> ReturnSeries {
    let mut values = Vec::with_capacity(n_max + 1);
    let mut errors = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let k = n / 2;
        let (v, e) = if n % 2 == 0 {
            pair_sum(group, &d[k], &d[k])
        } else if mu.parity() == Parity::Period2 {
            (0.0, 0.0)
        } else {
            pair_sum(group, &d[k + 1], &d[k])
        };
        values.push(v.min(1.0));
        errors.push(e);
    }
    values[0] = 1.0;
    ReturnSeries {
        values,
        errors,
        parity: mu.parity(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralDiagnostics {
    /// (n, p_{n+2}/p_n) pairs over even n.
    pub ratios: Vec<(usize, f64)>,
    /// ρ estimates from Richardson extrapolation of orders 1, 2, ...
    pub richardson: Vec<f64>,
    /// Exponent α of the n^(−α) correction from a log-ratio fit (about 3/2
    /// on non-amenable groups, d/2 on Z^d).
    pub power_exponent: f64,
    /// RMS residual of that fit.
    pub residual: f64,
    /// Plain root extraction p_n^(1/n) at the largest even n, for comparison.
    pub naive_root: f64,
}

/// Richardson orders used by the estimate.
const RICHARDSON_POINTS: usize = 8;

/// Value at x = 0 of the polynomial through the points (Neville).
fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut t = y.to_vec();
    let n = x.len();
    for m in 1..n {
        for i in 0..n - m {
            t[i] = (x[i + m] * t[i] - x[i] * t[i + 1]) / (x[i + m] - x[i]);
        }
    }
    t[0]
}

/// Estimate ρ = 1/R from a return series.
///
/// The even-step ratios p_{n+2}/p_n = ρ²(1 − 2α/n + O(n⁻²)) are extrapolated
/// to n = ∞ by Richardson extrapolation in 1/n over the last few points,
/// which removes the n^(−α) polynomial correction without knowing α.
pub fn spectral_radius_estimate(series: &ReturnSeries) -> Result<(f64, SpectralDiagnostics)> {
    let usable: Vec<usize> = (1..series.values.len())
        .filter(|&n| n % 2 == 0 && series.values[n] > 0.0)
        .collect();
    if usable.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} nonzero even-step return probabilities; need at least 8",
            usable.len()
        )));
    }
    let ratios: Vec<(usize, f64)> = usable
        .iter()
        .filter(|&&n| n + 2 < series.values.len() && series.values[n + 2] > 0.0)
        .map(|&n| (n, series.values[n + 2] / series.values[n]))
        .collect();
    let k = RICHARDSON_POINTS.min(ratios.len());
    let tail = &ratios[ratios.len() - k..];
    let mut richardson = Vec::new();
    for order in 1..=k {
        let pts = &tail[k - order..];
        let x: Vec<f64> = pts.iter().map(|&(n, _)| 1.0 / n as f64).collect();
        let y: Vec<f64> = pts.iter().map(|r| r.1).collect();
        richardson.push(extrapolate_to_zero(&x, &y).max(0.0).sqrt());
    }
    let rho = *richardson.last().unwrap();

    let fit = &ratios[ratios.len() / 3..];
    let rows: Vec<Vec<f64>> = fit
        .iter()
        .map(|&(n, _)| {
            let n = n as f64;
            vec![1.0, ((n + 2.0) / n).ln(), 1.0 / (n * (n + 2.0))]
        })
        .collect();
    let y: Vec<f64> = fit.iter().map(|r| r.1.ln()).collect();
    let (c, residual) = lstsq(&rows, &y)?;
    let last = *usable.last().unwrap();
    Ok((
        rho,
        SpectralDiagnostics {
            ratios,
            richardson,
            power_exponent: -c[1],
            residual,
            naive_root: series.values[last].powf(1.0 / last as f64),
        },
    ))
}
