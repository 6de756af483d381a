//! Green functions with explicit truncation bounds, first-visit kernels,
//! sphere sums, Martin kernels and Ancona-type probes.

mod ancona;
mod kernels;
mod restricted;

pub use ancona::{
    ancona_ratio, ancona_report, check_harnack, check_subadditivity, check_trivial_ancona, decay_fit,
    harnack_constant, sample_geodesic_triples, sample_triples, strong_ancona_probe, AnconaReport, AnconaRow, PropertyReport, StrongAnconaRow,
};
pub use kernels::{
    derivative_identity_check, eta_partial, first_visit, h_kernel, martin_cauchy_probe, martin_kernel, sphere_h_sums,
    DerivativeReport, EtaPartial, MartinProbe,
};
pub use restricted::{avoidance_decay, restricted_green, AvoidanceRow, AvoidanceTable, Region, RegionSpec, RestrictedValue};

use std::sync::{Arc, RwLock};

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{Group, NormalForm};
use crate::tree_exact::{radius_r, solve_branch, BranchSystem};
use crate::walk::{convolution_powers, spectral_radius_estimate, FiniteMeasure, ReturnSeries, SparseDistribution, DEFAULT_SUPPORT_CAP};

/// A closed interval of reals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Product of nonnegative intervals.
    pub fn mul(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo * o.lo,
            hi: self.hi * o.hi,
        }
    }

    /// Quotient of nonnegative intervals.
    pub fn div(self, o: Interval) -> Result<Interval> {
        if o.lo <= 0.0 {
            return Err(Error::Precision(format!(
                "division by the interval [{}, {}] which contains 0",
                o.lo, o.hi
            )));
        }
        Ok(Interval {
            lo: self.lo / o.hi,
            hi: self.hi / o.lo,
        })
    }
}

/// A Green-type value known to lie in [value, value + tail_bound].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenValue {
    pub value: f64,
    pub tail_bound: f64,
    pub r: f64,
}

impl GreenValue {
    pub fn exact(value: f64, r: f64) -> Self {
        GreenValue {
            value,
            tail_bound: 0.0,
            r,
        }
    }

    pub fn from_interval(iv: Interval, r: f64) -> Self {
        GreenValue {
            value: iv.lo,
            tail_bound: iv.hi - iv.lo,
            r,
        }
    }

    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }

    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.value,
            hi: self.upper(),
        }
    }
}

/// A source of Green-function values for one walk.
pub trait GreenOracle: Sync {
    fn group(&self) -> &Group;
    fn measure(&self) -> &FiniteMeasure;
    /// R or a certified lower estimate of it.
    fn radius(&self) -> f64;
    fn green(&self, x: &NormalForm, y: &NormalForm, r: f64) -> Result<GreenValue>;
    /// Upper bound for sup_v G_r(v, y), uniform in y; +∞ when unknown.
    fn sup_green(&self, r: f64) -> Result<f64>;
    /// Values are algebraically exact up to rounding.
    fn is_exact(&self) -> bool;

    fn green_ee(&self, r: f64) -> Result<GreenValue> {
        let e = self.group().identity();
        self.green(&e, &e, r)
    }
}

/// Relative width given to closed-form tree values (Newton residual level).
pub const TREE_RELATIVE_WIDTH: f64 = 1e-12;

/// Exact Green functions on free groups and free products of cyclic groups.
pub struct TreeGreen<'a> {
    group: &'a Group,
    mu: &'a FiniteMeasure,
    sys: BranchSystem,
    cache: RwLock<FxHashMap<u64, Arc<(Vec<f64>, f64)>>>,
}

impl<'a> TreeGreen<'a> {
    pub fn new(mu: &'a FiniteMeasure, group: &'a Group) -> Result<Self> {
        let sys = BranchSystem::build(mu, group)?;
        radius_r(&sys)?;
        Ok(TreeGreen {
            group,
            mu,
            sys,
            cache: RwLock::new(FxHashMap::default()),
        })
    }

    pub fn system(&self) -> &BranchSystem {
        &self.sys
    }

    /// Branch values and G_r(e,e) at r, memoized.
    fn point(&self, r: f64) -> Result<Arc<(Vec<f64>, f64)>> {
        if let Some(v) = self.cache.read().unwrap().get(&r.to_bits()) {
            return Ok(v.clone());
        }
        if r < 0.0 || r > self.radius() {
            return Err(Error::Domain(format!("r = {r} outside [0, R = {}]", self.radius())));
        }
        let f = solve_branch(&self.sys, r)
            .ok_or_else(|| Error::NonConvergence(format!("no branch solution at r = {r}")))?;
        let u = self.sys.first_return(&f, r);
        if u >= 1.0 {
            return Err(Error::Divergence(format!("first-return function reaches {u} at r = {r}")));
        }
        let entry = Arc::new((f, 1.0 / (1.0 - u)));
        self.cache.write().unwrap().insert(r.to_bits(), entry.clone());
        Ok(entry)
    }
}

impl GreenOracle for TreeGreen<'_> {
    fn group(&self) -> &Group {
        self.group
    }

    fn measure(&self) -> &FiniteMeasure {
        self.mu
    }

    fn radius(&self) -> f64 {
        radius_r(&self.sys).map(|d| d.r).unwrap_or(f64::NAN)
    }

    fn green(&self, x: &NormalForm, y: &NormalForm, r: f64) -> Result<GreenValue> {
        let p = self.point(r)?;
        let z = self.group.mul(&self.group.inv(y), x)?;
        let v = p.1 * self.sys.passage(self.group, &p.0, &z);
        let w = TREE_RELATIVE_WIDTH * (1.0 + z.len() as f64) * v;
        Ok(GreenValue {
            value: v - w,
            tail_bound: 2.0 * w,
            r,
        })
    }

    fn sup_green(&self, r: f64) -> Result<f64> {
        let p = self.point(r)?;
        // F(v, y) is a product of branch values
        if p.0.iter().all(|&f| f <= 1.0) {
            Ok(p.1 * (1.0 + TREE_RELATIVE_WIDTH))
        } else {
            Ok(f64::INFINITY)
        }
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Truncated power series Σ_{n≤N} rⁿ p_n(x, y) with pruning and geometric
/// tail bounds.
pub struct SeriesGreen<'a> {
    group: &'a Group,
    mu: &'a FiniteMeasure,
    powers: Vec<SparseDistribution>,
    rho_upper: f64,
}

/// Smallest admissible gap 1 − r·ρ_upper.
const SUMMABILITY_GAP: f64 = 1e-6;

impl<'a> SeriesGreen<'a> {
    /// `rho_upper` bounds the spectral radius. By default it is 1 for
    /// symmetric measures (p_n(x,y) ≤ ρⁿ ≤ 1), and otherwise the
    /// extrapolated estimate with a 1% margin.
    pub fn new(
        mu: &'a FiniteMeasure,
        group: &'a Group,
        n_max: usize,
        prune_eps: f64,
        rho_upper: Option<f64>,
    ) -> Result<Self> {
        let powers = convolution_powers(mu, group, n_max, prune_eps, DEFAULT_SUPPORT_CAP)?;
        let rho_upper = match rho_upper {
            Some(v) => v,
            None if mu.is_symmetric() => 1.0,
            None => {
                let e = group.identity();
                let values: Vec<f64> = powers.iter().map(|d| d.get(&e)).collect();
                let series = ReturnSeries::new(values, mu.parity());
                let (rho, _) = spectral_radius_estimate(&series)?;
                (rho * 1.01).min(1.0)
            }
        };
        Ok(SeriesGreen {
            group,
            mu,
            powers,
            rho_upper,
        })
    }

    pub fn n_max(&self) -> usize {
        self.powers.len() - 1
    }

    pub fn rho_upper(&self) -> f64 {
        self.rho_upper
    }

    fn tail(&self, r: f64) -> Result<f64> {
        let q = r * self.rho_upper;
        if q >= 1.0 - SUMMABILITY_GAP {
            return Err(Error::Divergence(format!(
                "r·ρ_upper = {q} is not summable; lower r or supply a smaller ρ bound"
            )));
        }
        let n = self.powers.len() as i32;
        let geometric = q.powi(n) / (1.0 - q);
        let pruned: f64 = self
            .powers
            .iter()
            .enumerate()
            .map(|(k, d)| r.powi(k as i32) * d.pruned_mass())
            .sum();
        Ok(geometric + pruned)
    }
}

impl GreenOracle for SeriesGreen<'_> {
    fn group(&self) -> &Group {
        self.group
    }

    fn measure(&self) -> &FiniteMeasure {
        self.mu
    }

    fn radius(&self) -> f64 {
        1.0 / self.rho_upper
    }

    fn green(&self, x: &NormalForm, y: &NormalForm, r: f64) -> Result<GreenValue> {
        if r < 0.0 {
            return Err(Error::Domain(format!("r = {r} is negative")));
        }
        let tail = self.tail(r)?;
        let z = self.group.mul(&self.group.inv(x), y)?;
        let mut terms: Vec<f64> = self
            .powers
            .iter()
            .enumerate()
            .map(|(n, d)| d.get(&z) * r.powi(n as i32))
            .filter(|t| *t > 0.0)
            .collect();
        terms.sort_by(|a, b| a.total_cmp(b));
        let value: f64 = terms.iter().sum();
        // rounding in the sum of positive terms
        let rounding = value * f64::EPSILON * (terms.len() as f64 + 1.0);
        Ok(GreenValue {
            value: (value - rounding).max(0.0),
            tail_bound: tail + 2.0 * rounding,
            r,
        })
    }

    fn sup_green(&self, r: f64) -> Result<f64> {
        if self.mu.is_symmetric() {
            Ok(self.green_ee(r)?.upper())
        } else {
            Ok(f64::INFINITY)
        }
    }

    fn is_exact(&self) -> bool {
        false
    }
}

/// G_r(x, y) from the truncated series with n_max convolution powers.
pub fn green(
    mu: &FiniteMeasure,
    group: &Group,
    x: &NormalForm,
    y: &NormalForm,
    r: f64,
    n_max: usize,
    prune_eps: f64,
) -> Result<GreenValue> {
    SeriesGreen::new(mu, group, n_max, prune_eps, None)?.green(x, y, r)
}
