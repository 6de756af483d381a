use rustc_hash::FxHashMap;
use serde::Serialize;

use super::{GreenOracle, GreenValue};
use crate::error::{Error, Result};
use crate::group::{Group, NormalForm};

/// A set of group elements, decidable element by element.
#[derive(Clone, Debug)]
pub enum Region {
    All,
    /// Closed ball {w : d(center, w) ≤ radius}.
    Ball { center: NormalForm, radius: usize },
    /// Complement of the closed ball.
    BallComplement { center: NormalForm, radius: usize },
    Elements(Vec<NormalForm>),
    Complement(Box<Region>),
    And(Vec<Region>),
    Or(Vec<Region>),
}

impl Region {
    pub fn contains(&self, group: &Group, w: &NormalForm) -> bool {
        match self {
            Region::All => true,
            Region::Ball { center, radius } => group.distance(center, w) <= *radius,
            Region::BallComplement { center, radius } => group.distance(center, w) > *radius,
            Region::Elements(list) => list.contains(w),
            Region::Complement(inner) => !inner.contains(group, w),
            Region::And(parts) => parts.iter().all(|p| p.contains(group, w)),
            Region::Or(parts) => parts.iter().any(|p| p.contains(group, w)),
        }
    }

    /// The complement of a single element.
    pub fn avoiding(y: &NormalForm) -> Region {
        Region::Complement(Box::new(Region::Elements(vec![y.clone()])))
    }
}

/// An allowed set Ω intersected with the computation ball B(e, enclosing_radius).
#[derive(Clone, Debug)]
pub struct RegionSpec {
    pub region: Region,
    pub enclosing_radius: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictedValue {
    pub value: GreenValue,
    /// Collatz–Wielandt upper bound on the spectral radius of the killed system.
    pub sub_markov_radius: f64,
    /// Number of unknowns in the linear system.
    pub states: usize,
    /// Upper bound on the weighted mass of paths leaving the enclosing ball.
    pub exit_flux: f64,
}

/// Sparse nonnegative system g = b + M·g over the allowed states of the ball.
struct KilledSystem {
    rows: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

const MAX_SWEEPS: usize = 200_000;
const RESIDUAL_TARGET: f64 = 1e-17;
/// A killed system with radius bound above this is treated as singular.
const SINGULAR_RADIUS: f64 = 1.0 - 1e-10;

impl KilledSystem {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * v[j]).sum())
            .collect()
    }

    /// Gauss–Seidel from 0. With nonnegative data the iterates increase
    /// monotonically towards the solution, so each is a lower bound.
    fn gauss_seidel(&self, b: &[f64], tol: f64) -> Vec<f64> {
        let n = self.rows.len();
        let mut g = vec![0.0; n];
        for _ in 0..MAX_SWEEPS {
            let mut change = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..n {
                let v = b[i] + self.rows[i].iter().map(|&(j, w)| w * g[j]).sum::<f64>();
                change = change.max(v - g[i]);
                scale = scale.max(v);
                g[i] = v;
            }
            if change <= tol * scale.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        g
    }

    /// Positive weight vector v and κ = max_i (Mv)_i/v_i ≥ ρ(M).
    fn collatz_wielandt(&self) -> (Vec<f64>, f64) {
        let n = self.rows.len();
        // v ≈ (I − M)^(−1)·1 is positive with (Mv)_i/v_i ≈ 1 − 1/v_i
        let v = self.gauss_seidel(&vec![1.0; n], 1e-12);
        let mv = self.apply(&v);
        let kappa = (0..n).map(|i| mv[i] / v[i]).fold(0.0, f64::max);
        (v, kappa)
    }

    /// Solve g = b + Mg with the certified error in the v-weighted norm.
    fn solve(&self, b: &[f64], v: &[f64], kappa: f64) -> (Vec<f64>, Vec<f64>) {
        let g = self.gauss_seidel(b, RESIDUAL_TARGET);
        let mg = self.apply(&g);
        let res_v = (0..g.len())
            .map(|i| (b[i] + mg[i] - g[i]).abs() / v[i])
            .fold(0.0, f64::max);
        let bound = res_v / (1.0 - kappa);
        let err = v.iter().map(|vi| vi * bound).collect();
        (g, err)
    }
}

/// G_r(x, y; Ω): the sum over paths x = w_0, …, w_n = y with w_0, …, w_{n−1}
/// in Ω (the empty path counts when x = y).
///
/// Paths confined to the enclosing ball are summed exactly by a linear
/// solve. Paths that leave the ball are bounded by the exit flux times
/// sup_v G_r(v, y), taken from the oracle.
pub fn restricted_green(
    oracle: &dyn GreenOracle,
    x: &NormalForm,
    y: &NormalForm,
    region: &RegionSpec,
    r: f64,
) -> Result<RestrictedValue> {
    let group = oracle.group();
    let mu = oracle.measure();
    let big_l = region.enclosing_radius;
    if x.len() > big_l || y.len() > big_l {
        return Err(Error::Precondition(format!(
            "endpoints must lie in the enclosing ball of radius {big_l}"
        )));
    }
    if !region.region.contains(group, x) {
        let v = if x == y { 1.0 } else { 0.0 };
        return Ok(RestrictedValue {
            value: GreenValue::exact(v, r),
            sub_markov_radius: 0.0,
            states: 0,
            exit_flux: 0.0,
        });
    }
    let ball = group.ball(big_l)?;
    let allowed: Vec<&NormalForm> = ball.iter().filter(|w| region.region.contains(group, w)).collect();
    let index: FxHashMap<&NormalForm, usize> = allowed.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let mut rows = Vec::with_capacity(allowed.len());
    let mut exit = Vec::with_capacity(allowed.len());
    let mut b = Vec::with_capacity(allowed.len());
    for w in &allowed {
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut out = 0.0;
        let mut direct = if *w == y { 1.0 } else { 0.0 };
        for (s, p) in mu.atoms() {
            let ws = group.mul_unchecked(w, s);
            let weight = r * p;
            if ws.len() > big_l {
                out += weight;
            } else if let Some(&j) = index.get(&ws) {
                row.push((j, weight));
            } else if &ws == y {
                // y outside Ω ends the path
                direct += weight;
            }
        }
        row.sort_by_key(|e| e.0);
        rows.push(row);
        exit.push(out);
        b.push(direct);
    }
    let sys = KilledSystem { rows, exit };
    let (v, kappa) = sys.collatz_wielandt();
    if !(kappa < SINGULAR_RADIUS) || v.iter().any(|vi| !vi.is_finite() || *vi <= 0.0) {
        return Err(Error::Precision(format!(
            "killed system is near-singular: radius bound {kappa} at r = {r}"
        )));
    }
    let ix = index[x];
    let (g, g_err) = sys.solve(&b, &v, kappa);
    let (h, h_err) = sys.solve(&sys.exit, &v, kappa);
    let flux = h[ix] + h_err[ix];
    // without a finite sup bound (recurrent regime) only the lower end is certified
    let outside = if flux > 0.0 {
        match oracle.sup_green(r) {
            Ok(s) => flux * s,
            Err(Error::Divergence(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        }
    } else {
        0.0
    };
    Ok(RestrictedValue {
        value: GreenValue {
            value: g[ix],
            tail_bound: g_err[ix] + outside,
            r,
        },
        sub_markov_radius: kappa,
        states: allowed.len(),
        exit_flux: flux,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AvoidanceRow {
    pub n: usize,
    pub value: GreenValue,
    pub log_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AvoidanceTable {
    pub rows: Vec<AvoidanceRow>,
    pub enclosing_radius: usize,
    /// Set on trees, where every path from x to z meets the ball.
    pub trivial: bool,
}

/// G_r(x, z; B(center, n)^c) for each n, on a common enclosing ball.
pub fn avoidance_decay(
    oracle: &dyn GreenOracle,
    x: &NormalForm,
    z: &NormalForm,
    center: &NormalForm,
    n_list: &[usize],
    r: f64,
    margin: usize,
) -> Result<AvoidanceTable> {
    let group = oracle.group();
    let n_top = n_list.iter().copied().max().unwrap_or(0);
    let (dx, dz) = (group.distance(x, center), group.distance(center, z));
    if dx + dz != group.distance(x, z) {
        return Err(Error::Precondition("center does not lie on a geodesic from x to z".into()));
    }
    if dx <= n_top || dz <= n_top {
        return Err(Error::Precondition(format!(
            "x and z must be farther than {n_top} from the center"
        )));
    }
    let big_l = x.len().max(z.len()).max(center.len() + n_top) + margin;
    let rows = n_list
        .iter()
        .map(|&n| {
            let spec = RegionSpec {
                region: Region::BallComplement {
                    center: center.clone(),
                    radius: n,
                },
                enclosing_radius: big_l,
            };
            let v = restricted_green(oracle, x, z, &spec, r)?.value;
            Ok(AvoidanceRow {
                n,
                value: v,
                log_value: v.value.ln(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(AvoidanceTable {
        rows,
        enclosing_radius: big_l,
        trivial: group.cayley_graph_is_tree(),
    })
}
