//! Exact Green functions on free groups and free products of cyclic groups
//! from their first-passage fixed-point systems.

mod coefficients;
mod system;

pub use coefficients::{series_coefficients, CoefficientSeries, Precision};
pub use system::{radius_r, solve_branch, BranchSystem, RadiusData};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::asymptotics::FitResult;
use crate::error::{Error, Result};
use crate::group::{Group, NormalForm};
use crate::numeric::lstsq;

/// Everything known in closed form at one value of r.
#[derive(Clone, Debug, Serialize)]
pub struct TreePoint {
    pub r: f64,
    pub branch: Vec<f64>,
    /// dF/dr and d²F/dr².
    pub branch_d1: Vec<f64>,
    pub branch_d2: Vec<f64>,
    /// First-return function U(r) and its derivatives.
    pub u: f64,
    pub u_d1: f64,
    pub u_d2: f64,
    /// G_r(e,e) and its derivatives.
    pub g: f64,
    pub g_d1: f64,
    pub g_d2: f64,
}

/// Solve and differentiate the system at r ≤ R. At r = R the derivatives
/// are infinite.
pub fn evaluate(sys: &BranchSystem, r: f64) -> Result<TreePoint> {
    let rd = radius_r(sys)?;
    if r > rd.r {
        return Err(Error::Domain(format!("r = {r} exceeds R = {}", rd.r)));
    }
    let f = solve_branch(sys, r)
        .ok_or_else(|| Error::NonConvergence(format!("no branch solution at r = {r}")))?;
    let n = sys.len();
    let u = sys.first_return(&f, r);
    if u >= 1.0 {
        return Err(Error::Domain(format!("first-return function reaches {u} at r = {r}")));
    }
    let g = 1.0 / (1.0 - u);
    let ret_poly = |v: &[f64]| sys.return_terms().iter().map(|&(b, w)| w * v[b]).sum::<f64>();
    if r == rd.r || n == 0 {
        let inf = if r == rd.r && n > 0 { f64::INFINITY } else { 0.0 };
        let d = vec![inf; n];
        let u_d1 = if n == 0 { sys.hold() } else { inf };
        return Ok(TreePoint {
            r,
            branch: f,
            branch_d1: d.clone(),
            branch_d2: d,
            u,
            u_d1,
            u_d2: if n == 0 { 0.0 } else { inf },
            g,
            g_d1: if n == 0 { u_d1 * g * g } else { inf },
            g_d2: if n == 0 { 2.0 * u_d1 * u_d1 * g * g * g } else { inf },
        });
    }
    // Φ = r·P(F): (I − J)F' = P, (I − J)F'' = 2·P_F F' + r·P_FF[F', F']
    let pf = sys.jacobian(&f, 1.0);
    let a = DMatrix::identity(n, n) - &pf * r;
    let lu = a.lu();
    let d1 = lu
        .solve(&DVector::from_vec(sys.phi(&f, 1.0)))
        .ok_or_else(|| Error::Precision("singular Jacobian".into()))?;
    let pf_d1 = &pf * &d1;
    let mut rhs = 2.0 * pf_d1;
    for ai in 0..n {
        for &(b, c, w) in sys.quadratic()[ai].iter() {
            rhs[ai] += r * 2.0 * w * d1[b] * d1[c];
        }
    }
    let d2 = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Precision("singular Jacobian".into()))?;
    let d1: Vec<f64> = d1.iter().copied().collect();
    let d2: Vec<f64> = d2.iter().copied().collect();
    let u_d1 = sys.hold() + ret_poly(&f) + r * ret_poly(&d1);
    let u_d2 = 2.0 * ret_poly(&d1) + r * ret_poly(&d2);
    Ok(TreePoint {
        r,
        branch: f,
        branch_d1: d1,
        branch_d2: d2,
        u,
        u_d1,
        u_d2,
        g,
        g_d1: u_d1 * g * g,
        g_d2: u_d2 * g * g + 2.0 * u_d1 * u_d1 * g * g * g,
    })
}

/// G_r(e,e).
pub fn green_ee(sys: &BranchSystem, r: f64) -> Result<f64> {
    Ok(evaluate_value(sys, r)?.1)
}

fn evaluate_value(sys: &BranchSystem, r: f64) -> Result<(Vec<f64>, f64)> {
    let rd = radius_r(sys)?;
    if r > rd.r || r < 0.0 {
        return Err(Error::Domain(format!("r = {r} outside [0, R = {}]", rd.r)));
    }
    let f = solve_branch(sys, r)
        .ok_or_else(|| Error::NonConvergence(format!("no branch solution at r = {r}")))?;
    let u = sys.first_return(&f, r);
    if u >= 1.0 {
        return Err(Error::Domain(format!("first-return function reaches {u} at r = {r}")));
    }
    Ok((f, 1.0 / (1.0 - u)))
}

/// Exact G_r(x, y) = G_r(e,e)·F_r(y⁻¹x, e).
pub fn green_exact(sys: &BranchSystem, group: &Group, r: f64, x: &NormalForm, y: &NormalForm) -> Result<f64> {
    let (f, g) = evaluate_value(sys, r)?;
    let z = group.mul(&group.inv(y), x)?;
    Ok(g * sys.passage(group, &f, &z))
}

/// Exact F_r(x, y).
pub fn first_visit_exact(sys: &BranchSystem, group: &Group, r: f64, x: &NormalForm, y: &NormalForm) -> Result<f64> {
    let (f, _) = evaluate_value(sys, r)?;
    let z = group.mul(&group.inv(y), x)?;
    Ok(sys.passage(group, &f, &z))
}

/// Per-syllable weights F(s)·F(s⁻¹) by factor, as polynomials in the word
/// length (index = length), truncated at `k_max`. For free factors also the
/// geometric ratio x = F₊F₋.
fn syllable_weights(sys: &BranchSystem, f: &[f64], k_max: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (fac, m) in sys.orders().iter().enumerate() {
        let mut a = vec![0.0; k_max + 1];
        match m {
            None => {
                let x = f[sys.variable(fac, 1).unwrap()] * f[sys.variable(fac, -1).unwrap()];
                let mut pw = x;
                for ak in a.iter_mut().skip(1) {
                    *ak = 2.0 * pw;
                    pw *= x;
                }
            }
            Some(m) => {
                let m = *m as i64;
                for p in 1..m {
                    let len = sys.syllable_len(fac, p);
                    if len <= k_max {
                        a[len] += f[sys.variable(fac, p).unwrap()] * f[sys.variable(fac, m - p).unwrap()];
                    }
                }
            }
        }
        out.push(a);
    }
    out
}

/// Exact sphere sums Σ_{|x|=k} H_r(e,x) for k = 0..=k_max.
pub fn sphere_sums_exact(sys: &BranchSystem, r: f64, k_max: usize) -> Result<Vec<f64>> {
    let (f, g) = evaluate_value(sys, r)?;
    let a = syllable_weights(sys, &f, k_max);
    let nf = a.len();
    // s[f][k]: words of length k whose first syllable lies in factor f
    let mut s = vec![vec![0.0; k_max + 1]; nf];
    for k in 1..=k_max {
        for fa in 0..nf {
            let mut v = 0.0;
            for j in 1..=k {
                if a[fa][j] == 0.0 {
                    continue;
                }
                let rest = if k == j {
                    1.0
                } else {
                    (0..nf).filter(|&h| h != fa).map(|h| s[h][k - j]).sum()
                };
                v += a[fa][j] * rest;
            }
            s[fa][k] = v;
        }
    }
    let mut out = vec![g * g];
    for k in 1..=k_max {
        out.push(g * g * (0..nf).map(|h| s[h][k]).sum::<f64>());
    }
    Ok(out)
}

/// η(r) = Σ_z G_r(e,z)·G_r(z,e) in closed form; +∞ at r = R for
/// non-amenable tree-like groups.
pub fn eta_exact(sys: &BranchSystem, r: f64) -> Result<f64> {
    let (f, g) = evaluate_value(sys, r)?;
    let mut total = 0.0;
    for (fac, m) in sys.orders().iter().enumerate() {
        let afull = match m {
            None => {
                let x = f[sys.variable(fac, 1).unwrap()] * f[sys.variable(fac, -1).unwrap()];
                if x >= 1.0 {
                    return Ok(f64::INFINITY);
                }
                2.0 * x / (1.0 - x)
            }
            Some(m) => {
                let m = *m as i64;
                (1..m)
                    .map(|p| f[sys.variable(fac, p).unwrap()] * f[sys.variable(fac, m - p).unwrap()])
                    .sum()
            }
        };
        total += afull / (1.0 + afull);
    }
    if total >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(g * g / (1.0 - total))
}

/// Σ_{x,y} G_r(e,y)·G_r(y,x)·G_r(x,e) = Σ_n (n+1)(n+2)/2·p_n rⁿ, from
/// the derivatives of G.
pub fn triple_sum_exact(sys: &BranchSystem, r: f64) -> Result<f64> {
    let t = evaluate(sys, r)?;
    Ok(t.g + 2.0 * r * t.g_d1 + 0.5 * r * r * t.g_d2)
}

/// Fit of log dG_r(e,e)/dr against log(R − r) on r_j = R(1 − 2^(−j)),
/// j = 4..=16, with derivatives from centered finite differences of exact
/// values. The regression carries the Puiseux correction columns
/// h^(1/2), h, h^(3/2) of a square-root branch point.
pub fn singularity_fit(sys: &BranchSystem) -> Result<FitResult> {
    let big_r = radius_r(sys)?.r;
    if !big_r.is_finite() {
        return Err(Error::Domain("no finite radius of convergence".into()));
    }
    let mut pts = Vec::new();
    for j in 4..=16 {
        let h = big_r * 2f64.powi(-j);
        let r = big_r - h;
        let d = 1e-3 * h;
        let gp = |t: f64| green_ee(sys, t);
        let deriv = (8.0 * (gp(r + d)? - gp(r - d)?) - (gp(r + 2.0 * d)? - gp(r - 2.0 * d)?)) / (12.0 * d);
        pts.push((h, deriv));
    }
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|&(h, _)| vec![1.0, h.ln(), h.sqrt(), h, h * h.sqrt()])
        .collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (c, residual) = lstsq(&rows, &y)?;
    Ok(FitResult {
        exponent: c[1],
        amplitude: c[0].exp(),
        residual,
        grid: "r_j = R(1 - 2^-j), j = 4..16".into(),
        points: pts,
    })
}
