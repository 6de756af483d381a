//! Coarse-geometry utilities: Gromov products, four-point tree
//! approximation and hyperbolicity estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Group, NormalForm};
use crate::error::{Error, Result};

/// Gromov product (x|y)_w = (d(w,x) + d(w,y) − d(x,y)) / 2.
pub fn gromov_product(group: &Group, x: &NormalForm, y: &NormalForm, w: &NormalForm) -> f64 {
    let dx = group.distance(w, x) as f64;
    let dy = group.distance(w, y) as f64;
    let dxy = group.distance(x, y) as f64;
    0.5 * (dx + dy - dxy)
}

#[derive(Clone, Debug, Serialize)]
pub struct FourPointReport {
    pub distances: Vec<Vec<f64>>,
    /// Four-point hyperbolicity of the configuration (0 for fewer than 4 points).
    pub delta: f64,
    /// Smallest error C found with d − C ≤ tree ≤ d.
    pub additive_error: f64,
    pub tree_metric: Vec<Vec<f64>>,
}

fn quad_delta(d: &[Vec<f64>], i: usize, j: usize, k: usize, l: usize) -> f64 {
    let mut s = [d[i][j] + d[k][l], d[i][k] + d[j][l], d[i][l] + d[j][k]];
    s.sort_by(|a, b| b.total_cmp(a));
    0.5 * (s[0] - s[1])
}

/// True when `d` satisfies the four-point condition on all quadruples,
/// including degenerate ones (which encode the triangle inequality).
fn is_tree_metric(d: &[Vec<f64>]) -> bool {
    let n = d.len();
    for i in 0..n {
        for j in 0..n {
            if d[i][j] < -1e-12 || (d[i][j] - d[j][i]).abs() > 1e-12 {
                return false;
            }
            for k in 0..n {
                for l in 0..n {
                    if quad_delta(d, i, j, k, l) > 1e-12 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Tree metric from Gromov products at base `w`, closed under the
/// max-min chain rule so that the products become 0-hyperbolic.
fn gromov_tree(d: &[Vec<f64>], w: usize) -> Vec<Vec<f64>> {
    let n = d.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = 0.5 * (d[w][i] + d[w][j] - d[i][j]);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = g[i][k].min(g[k][j]);
                if via > g[i][j] {
                    g[i][j] = via;
                }
            }
        }
    }
    let mut t = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                t[i][j] = g[i][i] + g[j][j] - 2.0 * g[i][j];
            }
        }
    }
    t
}

fn max_deficit(d: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
    let mut c: f64 = 0.0;
    for (di, ti) in d.iter().zip(t) {
        for (a, b) in di.iter().zip(ti) {
            c = c.max(a - b);
        }
    }
    c
}

/// Best tree approximation of a configuration of at most four points.
pub fn four_point_delta(group: &Group, points: &[NormalForm]) -> Result<FourPointReport> {
    if !(2..=4).contains(&points.len()) {
        return Err(Error::Precondition(format!(
            "four-point approximation takes 2 to 4 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| p.group_tag() != group.identity().group_tag()) {
        let _ = p;
        return Err(Error::Incompatible);
    }
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = group.distance(&points[i], &points[j]) as f64;
        }
    }
    let delta = if n == 4 { quad_delta(&d, 0, 1, 2, 3) } else { 0.0 };
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut consider = |t: Vec<Vec<f64>>| {
        if !is_tree_metric(&t) || t.iter().flatten().zip(d.iter().flatten()).any(|(a, b)| a > &(b + 1e-12)) {
            return;
        }
        let c = max_deficit(&d, &t);
        if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
            best = Some((c, t));
        }
    };
    for w in 0..n {
        consider(gromov_tree(&d, w));
    }
    if n == 4 && delta > 0.0 {
        // shrink the pair with the largest pair sum: reaches the lower bound δ
        let pairs = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))];
        let (&((i, j), (k, l)), _) = pairs
            .iter()
            .map(|p| (p, d[p.0 .0][p.0 .1] + d[p.1 .0][p.1 .1]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let mut t = d.clone();
        t[i][j] -= delta;
        t[j][i] -= delta;
        t[k][l] -= delta;
        t[l][k] -= delta;
        consider(t);
    }
    let (additive_error, tree_metric) = best.expect("Gromov trees are always valid");
    Ok(FourPointReport {
        distances: d,
        delta,
        additive_error,
        tree_metric,
    })
}

/// Empirical δ: the largest four-point defect over random quadruples drawn
/// from the ball of the given radius. An estimate, not a certificate.
pub fn estimate_delta(group: &Group, radius: usize, samples: usize, seed: u64) -> Result<f64> {
    let ball = group.ball(radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let pts: Vec<NormalForm> = (0..4)
            .map(|_| ball[rng.random_range(0..ball.len())].clone())
            .collect();
        let n = 4;
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                d[i][j] = group.distance(&pts[i], &pts[j]) as f64;
            }
        }
        best = best.max(quad_delta(&d, 0, 1, 2, 3));
    }
    Ok(best)
}

/// Random element obtained by normalizing a uniform word of length ≤ max_len.
pub(crate) fn random_element(group: &Group, max_len: usize, rng: &mut ChaCha8Rng) -> NormalForm {
    let len = rng.random_range(0..=max_len);
    let k = group.alphabet().len();
    let w: Vec<u8> = (0..len).map(|_| rng.random_range(0..k) as u8).collect();
    group.normalize(&w).expect("letters are in range")
}

/// Smallest C such that, for each sampled pair (x, y) with |x|, |y| ≤ max_len,
/// some a with |a| ≤ C satisfies |x·a·y| ≥ |x| + |y|.
pub fn extension_constant(
    group: &Group,
    max_len: usize,
    pairs: usize,
    seed: u64,
    search_radius: usize,
) -> Result<usize> {
    let ball = group.spheres(search_radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = 0;
    for _ in 0..pairs {
        let x = random_element(group, max_len, &mut rng);
        let y = random_element(group, max_len, &mut rng);
        let target = x.len() + y.len();
        let found = ball.iter().enumerate().find_map(|(k, layer)| {
            layer
                .iter()
                .any(|a| group.mul_unchecked(&group.mul_unchecked(&x, a), &y).len() >= target)
                .then_some(k)
        });
        match found {
            Some(k) => c = c.max(k),
            None => {
                return Err(Error::NonConvergence(format!(
                    "no extension of length ≤ {search_radius} for x = {}, y = {}",
                    group.format(&x),
                    group.format(&y)
                )))
            }
        }
    }
    Ok(c)
}
