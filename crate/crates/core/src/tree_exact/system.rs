use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{Group, NormalForm};
use crate::walk::FiniteMeasure;

/// Polynomial first-passage system F = Φ(F, r) for a walk on a free group
/// or a free product of cyclic groups.
///
/// Variable `(f, p)` is the generating function of first passage from the
/// syllable g_f^p to the identity. Each right-hand side is
/// `r·(c_a + Σ_b l_ab F_b + Σ q_abc F_b F_c)` with nonnegative coefficients.
#[derive(Debug)]
pub struct BranchSystem {
    vars: Vec<(usize, i64)>,
    index: FxHashMap<(usize, i64), usize>,
    constant: Vec<f64>,
    linear: Vec<Vec<(usize, f64)>>,
    quadratic: Vec<Vec<(usize, usize, f64)>>,
    /// U(r)/r = hold + Σ_t μ(t)·F_{t}.
    hold: f64,
    return_terms: Vec<(usize, f64)>,
    /// None for infinite cyclic factors.
    orders: Vec<Option<u32>>,
    radius: OnceLock<RadiusData>,
}

/// Radius of convergence and the branch values there.
#[derive(Clone, Debug, Serialize)]
pub struct RadiusData {
    /// +∞ when the system has no branch point (degenerate measures).
    pub r: f64,
    pub branch_values: Vec<f64>,
    pub newton_iterations: usize,
}

/// Divergence cap for branch values.
const DIVERGENCE_CAP: f64 = 1e8;
const MAX_NEWTON: usize = 400;

impl BranchSystem {
    /// Build the system for a measure supported on the identity and on
    /// single syllables (single letters for free factors).
    pub fn build(mu: &FiniteMeasure, group: &Group) -> Result<Self> {
        if !group.is_tree_like() {
            return Err(Error::Unsupported(
                "exact first-passage systems need a free group or a free product of cyclic groups".into(),
            ));
        }
        let nf = group.factor_count().unwrap();
        let orders: Vec<Option<u32>> = (0..nf).map(|f| group.factor_order(f)).collect();
        let mut vars = Vec::new();
        for (f, m) in orders.iter().enumerate() {
            match m {
                None => {
                    vars.push((f, 1));
                    vars.push((f, -1));
                }
                Some(m) => {
                    for p in 1..*m as i64 {
                        vars.push((f, p));
                    }
                }
            }
        }
        let index: FxHashMap<(usize, i64), usize> =
            vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        // atoms as (factor, signed step or residue, weight)
        let mut hold = 0.0;
        let mut steps: Vec<(usize, i64, f64)> = Vec::new();
        for (x, w) in mu.atoms() {
            if x.is_identity() {
                hold += w;
                continue;
            }
            let syl = group.syllables(x);
            if syl.len() != 1 {
                return Err(Error::Unsupported(format!(
                    "atom {} is not a single syllable",
                    group.format(x)
                )));
            }
            let (f, p) = syl[0];
            if orders[f].is_none() && p.abs() != 1 {
                return Err(Error::Unsupported(format!(
                    "atom {} is a power of a free generator; only letters are supported",
                    group.format(x)
                )));
            }
            steps.push((f, p, *w));
        }
        let n = vars.len();
        let mut constant = vec![0.0; n];
        let mut linear: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut quadratic: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
        let var_of = |f: usize, p: i64| -> usize {
            match orders[f] {
                None => index[&(f, p.signum())],
                Some(m) => index[&(f, p.rem_euclid(m as i64))],
            }
        };
        for (a, &(fa, pa)) in vars.iter().enumerate() {
            if hold > 0.0 {
                linear[a].push((a, hold));
            }
            for &(f, p, w) in &steps {
                if f != fa {
                    quadratic[a].push((var_of(f, p), a, w));
                    continue;
                }
                match orders[f] {
                    None => {
                        if pa + p == 0 {
                            constant[a] += w;
                        } else {
                            quadratic[a].push((a, a, w));
                        }
                    }
                    Some(m) => {
                        let q = (pa + p).rem_euclid(m as i64);
                        if q == 0 {
                            constant[a] += w;
                        } else {
                            linear[a].push((index[&(f, q)], w));
                        }
                    }
                }
            }
        }
        let return_terms = steps.iter().map(|&(f, p, w)| (var_of(f, p), w)).collect();
        Ok(BranchSystem {
            vars,
            index,
            constant,
            linear,
            quadratic,
            hold,
            return_terms,
            orders,
            radius: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// (factor, position) label of each variable.
    pub fn variables(&self) -> &[(usize, i64)] {
        &self.vars
    }

    pub fn variable(&self, factor: usize, position: i64) -> Option<usize> {
        self.index.get(&(factor, position)).copied()
    }

    pub(crate) fn constant(&self) -> &[f64] {
        &self.constant
    }

    pub(crate) fn linear(&self) -> &[Vec<(usize, f64)>] {
        &self.linear
    }

    pub(crate) fn quadratic(&self) -> &[Vec<(usize, usize, f64)>] {
        &self.quadratic
    }

    pub(crate) fn hold(&self) -> f64 {
        self.hold
    }

    pub(crate) fn return_terms(&self) -> &[(usize, f64)] {
        &self.return_terms
    }

    /// Φ(F, r).
    pub fn phi(&self, f: &[f64], r: f64) -> Vec<f64> {
        (0..self.len())
            .map(|a| {
                let mut s = self.constant[a];
                for &(b, c) in &self.linear[a] {
                    s += c * f[b];
                }
                for &(b, c, w) in &self.quadratic[a] {
                    s += w * f[b] * f[c];
                }
                r * s
            })
            .collect()
    }

    /// Jacobian ∂Φ/∂F.
    pub fn jacobian(&self, f: &[f64], r: f64) -> DMatrix<f64> {
        let n = self.len();
        let mut j = DMatrix::zeros(n, n);
        for a in 0..n {
            for &(b, c) in &self.linear[a] {
                j[(a, b)] += r * c;
            }
            for &(b, c, w) in &self.quadratic[a] {
                j[(a, b)] += r * w * f[c];
                j[(a, c)] += r * w * f[b];
            }
        }
        j
    }

    /// First-return generating function U(r) = r·(hold + Σ_t μ(t) F_t).
    pub fn first_return(&self, f: &[f64], r: f64) -> f64 {
        r * (self.hold + self.return_terms.iter().map(|&(b, w)| w * f[b]).sum::<f64>())
    }

    /// First-passage value F_r(z, e) from branch values: the product over
    /// the syllables of z.
    pub fn passage(&self, group: &Group, f: &[f64], z: &NormalForm) -> f64 {
        let mut v = 1.0;
        for (fac, p) in group.syllables(z) {
            match self.orders[fac] {
                None => v *= f[self.index[&(fac, p.signum())]].powi(p.unsigned_abs() as i32),
                Some(_) => v *= f[self.index[&(fac, p)]],
            }
        }
        v
    }

    /// Word length of syllable (factor, position).
    pub(crate) fn syllable_len(&self, factor: usize, p: i64) -> usize {
        match self.orders[factor] {
            None => p.unsigned_abs() as usize,
            Some(m) => {
                let p = p.rem_euclid(m as i64);
                p.min(m as i64 - p) as usize
            }
        }
    }

    pub(crate) fn orders(&self) -> &[Option<u32>] {
        &self.orders
    }

    pub(crate) fn cached_radius(&self) -> Option<&RadiusData> {
        self.radius.get()
    }

    pub(crate) fn set_radius(&self, data: RadiusData) -> &RadiusData {
        self.radius.get_or_init(|| data)
    }
}

fn spectral_radius_nonneg(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    let mut v = DVector::from_element(n, 1.0);
    let mut est = 0.0;
    for _ in 0..500 {
        // shift by the identity to avoid periodic oscillation
        let w = j * &v + &v;
        let norm = w.amax();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm / v.amax() - 1.0;
        v = w / norm;
    }
    est
}

/// Minimal nonnegative solution of F = Φ(F, r) by Newton's method from 0,
/// or `None` when none exists (r beyond the radius of convergence).
pub(crate) fn newton_from_zero(sys: &BranchSystem, r: f64) -> Option<Vec<f64>> {
    let n = sys.len();
    let mut f = vec![0.0; n];
    for _ in 0..MAX_NEWTON {
        let phi = sys.phi(&f, r);
        let resid: Vec<f64> = phi.iter().zip(&f).map(|(p, x)| p - x).collect();
        let scale = f.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if resid.iter().all(|d| d.abs() <= 1e-16 * scale) {
            return Some(f);
        }
        let a = DMatrix::identity(n, n) - sys.jacobian(&f, r);
        let step = a.lu().solve(&DVector::from_vec(resid))?;
        if step.iter().any(|d| !d.is_finite() || *d < -1e-12 * scale) {
            return None;
        }
        let mut change: f64 = 0.0;
        for i in 0..n {
            f[i] += step[i].max(0.0);
            change = change.max(step[i].abs());
        }
        if f.iter().any(|x| *x > DIVERGENCE_CAP) {
            return None;
        }
        if change <= 1e-15 * scale {
            break;
        }
    }
    let phi = sys.phi(&f, r);
    let ok = phi
        .iter()
        .zip(&f)
        .all(|(p, x)| (p - x).abs() <= 1e-12 * x.abs().max(1e-300) + 1e-14);
    // the minimal solution is stable: the Jacobian radius is at most 1
    (ok && spectral_radius_nonneg(&sys.jacobian(&f, r)) <= 1.0 + 1e-7).then_some(f)
}

/// Branch values at r, or `None` when r exceeds the radius of convergence.
pub fn solve_branch(sys: &BranchSystem, r: f64) -> Option<Vec<f64>> {
    if r < 0.0 {
        return None;
    }
    if let Some(rd) = sys.cached_radius() {
        if r == rd.r {
            return Some(rd.branch_values.clone());
        }
        if r > rd.r {
            return None;
        }
    }
    newton_from_zero(sys, r)
}

/// Radius of convergence R of the Green function, located where the
/// Jacobian of the fixed-point map reaches spectral radius 1.
pub fn radius_r(sys: &BranchSystem) -> Result<&RadiusData> {
    if let Some(rd) = sys.cached_radius() {
        return Ok(rd);
    }
    let data = locate_radius(sys)?;
    Ok(sys.set_radius(data))
}

fn locate_radius(sys: &BranchSystem) -> Result<RadiusData> {
    let n = sys.len();
    let mut hi = 1.0;
    while newton_from_zero(sys, hi).is_some() {
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(RadiusData {
                r: f64::INFINITY,
                branch_values: Vec::new(),
                newton_iterations: 0,
            });
        }
    }
    let mut lo = hi / 2.0;
    if newton_from_zero(sys, lo).is_none() {
        lo = 0.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if newton_from_zero(sys, mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f0 = newton_from_zero(sys, lo).expect("lower bracket has a solution");
    // Perron vector of the Jacobian at the lower bracket
    let j = sys.jacobian(&f0, lo);
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..2000 {
        let w = &j * &v + &v;
        v = &w / w.sum();
    }
    // augmented Newton on (F, v, r): F = Φ(F,r), (I − J)v = 0, Σv = 1
    let dim = 2 * n + 1;
    let mut x = DVector::zeros(dim);
    for i in 0..n {
        x[i] = f0[i];
        x[n + i] = v[i];
    }
    x[2 * n] = lo;
    let mut iterations = 0;
    for it in 0..100 {
        iterations = it + 1;
        let f: Vec<f64> = (0..n).map(|i| x[i]).collect();
        let vv = DVector::from_iterator(n, (0..n).map(|i| x[n + i]));
        let r = x[2 * n];
        let phi = sys.phi(&f, r);
        let jm = sys.jacobian(&f, r);
        let jv = &jm * &vv;
        let mut g = DVector::zeros(dim);
        for i in 0..n {
            g[i] = f[i] - phi[i];
            g[n + i] = vv[i] - jv[i];
        }
        g[2 * n] = vv.sum() - 1.0;
        let mut a = DMatrix::zeros(dim, dim);
        for i in 0..n {
            for k in 0..n {
                a[(i, k)] = if i == k { 1.0 } else { 0.0 } - jm[(i, k)];
                a[(n + i, n + k)] = a[(i, k)];
            }
            a[(i, 2 * n)] = -phi[i] / r;
            a[(n + i, 2 * n)] = -jv[i] / r;
            a[(2 * n, n + i)] = 1.0;
        }
        // ∂(Jv)_a/∂F_c from the quadratic terms
        for ai in 0..n {
            for &(b, c, w) in sys.quadratic()[ai].iter() {
                a[(n + ai, c)] -= r * w * vv[b];
                a[(n + ai, b)] -= r * w * vv[c];
            }
        }
        let step = a
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::NonConvergence("singular augmented system at the branch point".into()))?;
        x -= &step;
        if step.amax() < 1e-16 * x.amax().max(1.0) {
            break;
        }
    }
    let r = x[2 * n];
    let branch_values: Vec<f64> = (0..n).map(|i| x[i].max(0.0)).collect();
    if !(r.is_finite() && r > lo - 1e-6 && r < hi + 1e-6) || (0..n).any(|i| x[n + i] < -1e-9) {
        return Err(Error::NonConvergence(format!(
            "branch-point refinement left the bracket [{lo}, {hi}]: r = {r}"
        )));
    }
    Ok(RadiusData {
        r,
        branch_values,
        newton_iterations: iterations,
    })
}
