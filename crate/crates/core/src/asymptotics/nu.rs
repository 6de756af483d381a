use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{eta_partial, h_kernel, GreenOracle, Interval};
use crate::group::NormalForm;

/// Test functions integrated against ν_r(x) ∝ H_r(e,x).
#[derive(Clone, Debug)]
pub enum NuFunction {
    One,
    /// Indicator of normal forms that start with the given element's word.
    Prefix(NormalForm),
    /// x ↦ G_r(p, x)/G_r(e, x) for a fixed point p.
    MartinRatio(NormalForm),
}

impl NuFunction {
    fn eval(&self, oracle: &dyn GreenOracle, x: &NormalForm, r: f64) -> Result<Interval> {
        match self {
            NuFunction::One => Ok(Interval::point(1.0)),
            NuFunction::Prefix(p) => {
                let hit = x.letters().starts_with(p.letters());
                Ok(Interval::point(if hit { 1.0 } else { 0.0 }))
            }
            NuFunction::MartinRatio(p) => {
                let e = oracle.group().identity();
                oracle.green(p, x, r)?.interval().div(oracle.green(&e, x, r)?.interval())
            }
        }
    }

    /// Upper bound of f outside the truncation ball, or None when unknown.
    fn sup(&self, oracle: &dyn GreenOracle, r: f64) -> Option<f64> {
        match self {
            NuFunction::One | NuFunction::Prefix(_) => Some(1.0),
            NuFunction::MartinRatio(p) => {
                // one step from e towards p costs at most the Harnack factor
                let c = crate::green::harnack_constant(oracle.measure(), oracle.group(), r).ok()?;
                Some(c.powi(p.len() as i32))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NuValue {
    pub r: f64,
    /// Ratio of the truncated sums.
    pub value: f64,
    /// Enclosure that accounts for the truncated mass; None near R.
    pub bounds: Option<Interval>,
}

/// ∫ f dν_r = Σ_x H_r(e,x) f(x) / Σ_x H_r(e,x), summed over spheres up to k_max.
pub fn nu_functional(oracle: &dyn GreenOracle, f: &NuFunction, r: f64, k_max: usize) -> Result<NuValue> {
    let group = oracle.group();
    let e = group.identity();
    let (mut num_lo, mut num_hi, mut den_lo, mut den_hi) = (0.0, 0.0, 0.0, 0.0);
    for sphere in group.spheres(k_max)? {
        for x in &sphere {
            let h = h_kernel(oracle, &e, x, r)?.interval();
            let v = f.eval(oracle, x, r)?;
            num_lo += h.lo * v.lo;
            num_hi += h.hi * v.hi;
            den_lo += h.lo;
            den_hi += h.hi;
        }
    }
    if !(den_lo > 0.0) {
        return Err(Error::Precision("vanishing normalization".into()));
    }
    let value = 0.5 * (num_lo + num_hi) / (0.5 * (den_lo + den_hi));
    let tail = eta_partial(oracle, r, k_max)?.tail;
    let bounds = match (tail, f.sup(oracle, r)) {
        (Some(t), Some(s)) => Some(Interval {
            lo: num_lo / (den_hi + t),
            hi: (num_hi + s * t) / den_lo,
        }),
        _ => None,
    };
    Ok(NuValue { r, value, bounds })
}

#[derive(Clone, Debug, Serialize)]
pub struct NuProbe {
    pub values: Vec<NuValue>,
    /// |ν_{r_{i+1}}(f) − ν_{r_i}(f)| along the grid.
    pub differences: Vec<f64>,
    pub differences_decreasing: bool,
}

/// ν_r(f) along an increasing grid, with successive differences.
pub fn nu_convergence_probe(oracle: &dyn GreenOracle, f: &NuFunction, r_grid: &[f64], k_max: usize) -> Result<NuProbe> {
    let values: Vec<NuValue> = r_grid
        .iter()
        .map(|&r| nu_functional(oracle, f, r, k_max))
        .collect::<Result<_>>()?;
    let differences: Vec<f64> = values.windows(2).map(|w| (w[1].value - w[0].value).abs()).collect();
    let differences_decreasing = differences.windows(2).all(|w| w[1] <= w[0]);
    Ok(NuProbe {
        values,
        differences,
        differences_decreasing,
    })
}
