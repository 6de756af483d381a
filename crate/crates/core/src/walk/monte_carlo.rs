use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use super::FiniteMeasure;
use crate::error::{Error, Result};
use crate::group::{Group, NormalForm};

const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Sample mean with a bootstrap percentile confidence interval.
#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Estimate {
    pub fn from_values(values: &[f64], level: f64, seed: u64) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb005_7a11);
        let mut means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                let s: f64 = (0..values.len())
                    .map(|_| values[rng.random_range(0..values.len())])
                    .sum();
                s / n
            })
            .collect();
        means.sort_by(|a, b| a.total_cmp(b));
        let tail = (1.0 - level) / 2.0;
        let idx = |q: f64| ((q * (means.len() - 1) as f64).round() as usize).min(means.len() - 1);
        Estimate {
            mean,
            std_err: (var / n).sqrt(),
            ci_low: means[idx(tail)],
            ci_high: means[idx(1.0 - tail)],
            level,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            samples: values.len(),
            seed,
        }
    }

    pub fn excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

fn sampler(mu: &FiniteMeasure) -> WeightedIndex<f64> {
    WeightedIndex::new(mu.atoms().iter().map(|a| a.1)).expect("positive weights")
}

fn step(group: &Group, x: &NormalForm, s: &NormalForm) -> NormalForm {
    if s.len() == 1 {
        group.mul_letter(x, s.letters()[0])
    } else {
        group.mul_unchecked(x, s)
    }
}

fn endpoint(group: &Group, mu: &FiniteMeasure, dist: &WeightedIndex<f64>, n: usize, rng: &mut ChaCha8Rng) -> NormalForm {
    let mut x = group.identity();
    for _ in 0..n {
        x = step(group, &x, &mu.atoms()[dist.sample(rng)].0);
    }
    x
}

/// Trajectory X_0 = e, ..., X_n with independent μ-increments.
pub fn sample_path(mu: &FiniteMeasure, group: &Group, n: usize, seed: u64) -> Vec<NormalForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = sampler(mu);
    let mut path = Vec::with_capacity(n + 1);
    path.push(group.identity());
    for _ in 0..n {
        let s = &mu.atoms()[dist.sample(&mut rng)].0;
        let next = step(group, path.last().unwrap(), s);
        path.push(next);
    }
    path
}

/// Endpoints X_n of independent trajectories; sample i uses stream i of
/// the seeded generator, so results do not depend on scheduling.
pub fn sample_endpoints(mu: &FiniteMeasure, group: &Group, n: usize, samples: usize, seed: u64) -> Vec<NormalForm> {
    let dist = sampler(mu);
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            endpoint(group, mu, &dist, n, &mut rng)
        })
        .collect()
}

/// Mean of d(X_n, e)/n with a 99% bootstrap interval.
pub fn escape_rate(mu: &FiniteMeasure, group: &Group, n: usize, samples: usize, seed: u64) -> Result<Estimate> {
    if n == 0 || samples < 2 {
        return Err(Error::Precondition("escape rate needs n ≥ 1 and at least 2 samples".into()));
    }
    let values: Vec<f64> = sample_endpoints(mu, group, n, samples, seed)
        .iter()
        .map(|x| x.len() as f64 / n as f64)
        .collect();
    Ok(Estimate::from_values(&values, 0.99, seed))
}

/// Mean of k⁻¹·log F_R(e, X_k), where `log_first_visit(x)` returns log F_R(e,x).
pub fn green_cocycle_rate(
    mu: &FiniteMeasure,
    group: &Group,
    log_first_visit: &(dyn Fn(&NormalForm) -> Result<f64> + Sync),
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if k == 0 || samples < 2 {
        return Err(Error::Precondition("cocycle rate needs k ≥ 1 and at least 2 samples".into()));
    }
    let values = sample_endpoints(mu, group, k, samples, seed)
        .iter()
        .map(|x| log_first_visit(x).map(|v| v / k as f64))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_values(&values, 0.99, seed))
}

/// Plug-in entropy H(X_n)/n of the empirical endpoint distribution. Biased
/// low when samples are few compared to the support.
pub fn entropy_estimate(mu: &FiniteMeasure, group: &Group, n: usize, samples: usize, seed: u64) -> f64 {
    let mut counts: FxHashMap<NormalForm, usize> = FxHashMap::default();
    for x in sample_endpoints(mu, group, n, samples, seed) {
        *counts.entry(x).or_insert(0) += 1;
    }
    let total = samples as f64;
    let mut terms: Vec<f64> = counts
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .collect();
    terms.sort_by(|a, b| a.total_cmp(b));
    terms.iter().sum::<f64>() / n as f64
}
