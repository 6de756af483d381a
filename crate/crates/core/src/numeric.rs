//! Small numerical helpers shared by the fitting and series code.

use std::ops::{Add, AddAssign, Div, Mul, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares solution of `A·c ≈ y`, with the RMS residual.
pub fn lstsq(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = rows.len();
    let k = rows.first().map_or(0, |r| r.len());
    if m < k || k == 0 {
        return Err(Error::InsufficientData(format!(
            "least squares with {m} rows and {k} unknowns"
        )));
    }
    let a = DMatrix::from_fn(m, k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::InsufficientData(format!("least squares failed: {e}")))?;
    let r = &a * &c - &b;
    let rms = (r.norm_squared() / m as f64).sqrt();
    Ok((c.iter().copied().collect(), rms))
}

/// Ordinary linear regression y ≈ a + b·x; returns (a, b, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&t| vec![1.0, t]).collect();
    let (c, rms) = lstsq(&rows, y)?;
    Ok((c[0], c[1], rms))
}

/// Double-double floating point: an unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2,
/// giving about 106 bits of mantissa.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, o: Dd) {
        *self = *self + o;
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + Dd {
            hi: -o.hi,
            lo: -o.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from_f64(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}
