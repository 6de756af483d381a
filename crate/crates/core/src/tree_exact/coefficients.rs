use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{radius_r, BranchSystem};
use crate::error::{Error, Result};
use crate::numeric::Dd;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    F64,
    DoubleDouble,
    /// Exact rational arithmetic on the binary values of the weights.
    Rational,
}

impl Precision {
    /// Double-double above a thousand coefficients, f64 below.
    pub fn auto(n_max: usize) -> Self {
        if n_max > 1000 {
            Precision::DoubleDouble
        } else {
            Precision::F64
        }
    }
}

/// Largest n_max accepted in rational mode.
pub const RATIONAL_LIMIT: usize = 200;

/// Return probabilities p_n(e,e) with the stored values scaled by sⁿ.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientSeries {
    /// p_n·sⁿ.
    pub scaled: Vec<f64>,
    /// Scale s (R in floating modes, 1 in rational mode).
    pub scale: f64,
    pub precision: Precision,
}

impl CoefficientSeries {
    pub fn n_max(&self) -> usize {
        self.scaled.len() - 1
    }

    /// p_n(e,e); underflows to 0 for large n.
    pub fn p(&self, n: usize) -> f64 {
        self.scaled[n] * self.scale.powi(-(n as i32))
    }

    /// p_n·Rⁿ for the given R.
    pub fn p_times_power(&self, n: usize, big_r: f64) -> f64 {
        if self.scale == big_r {
            self.scaled[n]
        } else {
            (self.scaled[n].ln() + n as f64 * (big_r / self.scale).ln()).exp()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.scaled.len()).map(|n| self.p(n)).collect()
    }
}

trait Scalar: Clone + Add<Output = Self> + Mul<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Dd {
    fn zero() -> Self {
        Dd::ZERO
    }
    fn one() -> Self {
        Dd::ONE
    }
    fn from_f64(x: f64) -> Self {
        Dd::from_f64(x)
    }
    fn to_f64(&self) -> f64 {
        Dd::to_f64(*self)
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        BigRational::from_integer(BigInt::from(1))
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite weight")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Expand the fixed-point system order by order in r:
/// f_{a,n} = s·([n=1]c_a + Σ l_ab f_{b,n−1} + Σ q_abc Σ_k f_{b,k} f_{c,n−1−k}),
/// u_n = s·([n=1]hold + Σ_t μ(t) f_{t,n−1}), g_n = Σ_k u_k g_{n−k}.
fn expand<T: Scalar>(sys: &BranchSystem, n_max: usize, s: f64) -> Vec<f64> {
    let nv = sys.len();
    let sc = T::from_f64(s);
    let konst: Vec<T> = sys.constant().iter().map(|&c| T::from_f64(c)).collect();
    let lin: Vec<Vec<(usize, T)>> = sys
        .linear()
        .iter()
        .map(|row| row.iter().map(|&(b, c)| (b, T::from_f64(c))).collect())
        .collect();
    let quad: Vec<Vec<(usize, usize, T)>> = sys
        .quadratic()
        .iter()
        .map(|row| row.iter().map(|&(b, c, w)| (b, c, T::from_f64(w))).collect())
        .collect();
    let hold = T::from_f64(sys.hold());
    let ret: Vec<(usize, T)> = sys.return_terms().iter().map(|&(b, w)| (b, T::from_f64(w))).collect();

    let mut f: Vec<Vec<T>> = vec![vec![T::zero(); n_max + 1]; nv];
    let mut u: Vec<T> = vec![T::zero(); n_max + 1];
    let mut g: Vec<T> = vec![T::zero(); n_max + 1];
    g[0] = T::one();
    for n in 1..=n_max {
        for a in 0..nv {
            let mut acc = if n == 1 { konst[a].clone() } else { T::zero() };
            for (b, c) in &lin[a] {
                acc = acc + c.clone() * f[*b][n - 1].clone();
            }
            if n >= 3 {
                for (b, c, w) in &quad[a] {
                    let mut conv = T::zero();
                    for k in 1..=n - 2 {
                        conv = conv + f[*b][k].clone() * f[*c][n - 1 - k].clone();
                    }
                    acc = acc + w.clone() * conv;
                }
            }
            f[a][n] = sc.clone() * acc;
        }
        let mut un = if n == 1 { hold.clone() } else { T::zero() };
        for (b, w) in &ret {
            un = un + w.clone() * f[*b][n - 1].clone();
        }
        u[n] = sc.clone() * un;
        let mut gn = T::zero();
        for k in 1..=n {
            gn = gn + u[k].clone() * g[n - k].clone();
        }
        g[n] = gn;
    }
    g.iter().map(|x| x.to_f64()).collect()
}

/// Exact return probabilities p_0..p_{n_max} from the branch system.
pub fn series_coefficients(sys: &BranchSystem, n_max: usize, precision: Precision) -> Result<CoefficientSeries> {
    if n_max > 100_000 {
        return Err(Error::Resource(format!("n_max = {n_max} exceeds 10^5")));
    }
    let big_r = radius_r(sys)?.r;
    let scale = if big_r.is_finite() { big_r } else { 1.0 };
    let scaled = match precision {
        Precision::F64 => expand::<f64>(sys, n_max, scale),
        Precision::DoubleDouble => expand::<Dd>(sys, n_max, scale),
        Precision::Rational => {
            if n_max > RATIONAL_LIMIT {
                return Err(Error::Precision(format!(
                    "rational mode is limited to n_max ≤ {RATIONAL_LIMIT}; use double-double"
                )));
            }
            let exact = expand::<BigRational>(sys, n_max, 1.0);
            return Ok(CoefficientSeries {
                scaled: exact,
                scale: 1.0,
                precision,
            });
        }
    };
    if scaled.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precision(
            "coefficient overflow; use extended precision".into(),
        ));
    }
    Ok(CoefficientSeries {
        scaled,
        scale,
        precision,
    })
}
