use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::Dd;

/// First-return probabilities f_n, stored as f_n Rⁿ.
#[derive(Clone, Debug, Serialize)]
pub struct RenewalSeries {
    /// f_n Rⁿ; index 0 is unused and zero.
    pub scaled: Vec<f64>,
    pub errors: Vec<f64>,
    pub big_r: f64,
    /// Σ f_n Rⁿ over the trusted range.
    pub total: f64,
    /// Set when the error bound overtook f_n; the series ends before it.
    pub stopped_at: Option<usize>,
}

impl RenewalSeries {
    pub fn f(&self, n: usize) -> f64 {
        self.scaled[n] * self.big_r.powi(-(n as i32))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RenewalReport {
    pub series: RenewalSeries,
    /// max_n |p_n − Σ_k f_k p_{n−k}| / p_n over the trusted range.
    pub reconstruction_error: f64,
    /// (n, f_n/p_n) over the requested window.
    pub ratios: Vec<(usize, f64)>,
    /// 1/G_R(e,e)² when supplied.
    pub target: Option<f64>,
    /// max relative deviation of f_n/p_n from the target over the window.
    pub max_deviation: Option<f64>,
}

/// p_n = Σ_{k=1}^{n} f_k p_{n−k} + [n = 0], on scaled sequences.
pub fn reconstruct(f_scaled: &[f64], n_max: usize) -> Vec<f64> {
    let mut p = vec![Dd::ZERO; n_max + 1];
    p[0] = Dd::ONE;
    for n in 1..=n_max {
        let mut s = Dd::ZERO;
        for k in 1..=n.min(f_scaled.len() - 1) {
            s += Dd::from_f64(f_scaled[k]) * p[n - k];
        }
        p[n] = s;
    }
    p.into_iter().map(Dd::to_f64).collect()
}

/// Invert the renewal equation: f_n = p_n − Σ_{k=1}^{n−1} f_k p_{n−k}.
///
/// `scaled[n]` = p_n Rⁿ with error bounds `errors[n]` (same scaling). Since
/// F = 1 − 1/P, an input error δP moves F by δP·(1 − F)² and a rounding
/// error injected at step m moves later terms through 1 − F; both kernels
/// have absolute mass at most 4. The bound is twice that first-order
/// propagation. The series stops at the first n where it exceeds |f_n|.
pub fn renewal_first_return(
    scaled: &[f64],
    errors: &[f64],
    big_r: f64,
    green_at_r: Option<f64>,
    window: (usize, usize),
    parity_step: usize,
) -> Result<RenewalReport> {
    if scaled.is_empty() || (scaled[0] - 1.0).abs() > 1e-15 {
        return Err(Error::Precondition("p_0 must equal 1".into()));
    }
    if errors.len() != scaled.len() {
        return Err(Error::Precondition("errors and values differ in length".into()));
    }
    let n_max = scaled.len() - 1;
    let pd: Vec<Dd> = scaled.iter().map(|&v| Dd::from_f64(v)).collect();
    let mut fd = vec![Dd::ZERO; n_max + 1];
    let mut rounding = vec![0.0f64; n_max + 1];
    for n in 1..=n_max {
        let mut s = Dd::ZERO;
        let mut magnitude = scaled[n].abs();
        for k in 1..n {
            let t = fd[k] * pd[n - k];
            magnitude += t.to_f64().abs();
            s += t;
        }
        fd[n] = pd[n] - s;
        rounding[n] = 4.0 * n as f64 * DD_EPS * magnitude;
    }
    let f: Vec<f64> = fd.iter().map(|v| v.to_f64()).collect();
    // coefficients of 1 − F and (1 − F)²
    let mut d = vec![0.0f64; n_max + 1];
    d[0] = 1.0;
    for k in 1..=n_max {
        d[k] = -f[k];
    }
    let mut c = vec![0.0f64; n_max + 1];
    for i in 0..=n_max {
        if d[i] == 0.0 {
            continue;
        }
        for j in 0..=n_max - i {
            c[i + j] += d[i] * d[j];
        }
    }
    let mut err = vec![0.0f64; n_max + 1];
    let mut stopped_at = None;
    let mut trusted = n_max;
    for n in 1..=n_max {
        let mut e = 0.0;
        for k in 0..n {
            e += c[k].abs() * errors[n - k] + d[k].abs() * rounding[n - k];
        }
        err[n] = 2.0 * e;
        if f[n] != 0.0 && err[n] > f[n].abs() {
            stopped_at = Some(n);
            trusted = n - 1;
            break;
        }
    }
    let mut f = f;
    f.truncate(trusted + 1);
    err.truncate(trusted + 1);
    let total: f64 = f.iter().sum();
    let reconstruction_error = reconstruction_error(&fd[..=trusted], &pd[..=trusted]);
    let step = parity_step.max(1);
    let ratios: Vec<(usize, f64)> = (window.0..=window.1.min(trusted))
        .filter(|n| n % step == window.0 % step && scaled[*n] > 0.0)
        .map(|n| (n, f[n] / scaled[n]))
        .collect();
    let target = green_at_r.map(|g| 1.0 / (g * g));
    let max_deviation = target.map(|t| {
        ratios
            .iter()
            .map(|&(_, q)| (q / t - 1.0).abs())
            .fold(0.0, f64::max)
    });
    Ok(RenewalReport {
        series: RenewalSeries {
            scaled: f,
            errors: err,
            big_r,
            total,
            stopped_at,
        },
        reconstruction_error,
        ratios,
        target,
        max_deviation,
    })
}

/// Unit roundoff of double-double arithmetic.
const DD_EPS: f64 = 1.0 / (1u128 << 104) as f64;

fn reconstruction_error(f: &[Dd], p: &[Dd]) -> f64 {
    let mut worst = 0.0f64;
    for n in 1..p.len() {
        let mut s = Dd::ZERO;
        for k in 1..=n {
            s += f[k] * p[n - k];
        }
        let pn = p[n].to_f64();
        let diff = (s - p[n]).to_f64().abs();
        if pn > 0.0 {
            worst = worst.max(diff / pn);
        } else {
            worst = worst.max(diff);
        }
    }
    worst
}
