use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::FiniteMeasure;
use crate::error::{Error, Result};
use crate::group::{Group, NormalForm};

/// Default pruning threshold and support cap.
pub const DEFAULT_PRUNE_EPS: f64 = 1e-16;
pub const DEFAULT_SUPPORT_CAP: usize = 50_000_000;

/// Entries per parallel work unit; fixed so that results do not depend on
/// the thread count.
const CHUNK: usize = 1 << 14;

/// Finitely supported nonnegative mass function with a ledger of mass
/// removed by pruning.
#[derive(Clone, Debug)]
pub struct SparseDistribution {
    masses: FxHashMap<NormalForm, f64>,
    pruned_mass: f64,
    step: usize,
}

impl SparseDistribution {
    /// Point mass at the identity.
    pub fn delta(group: &Group) -> Self {
        let mut masses = FxHashMap::default();
        masses.insert(group.identity(), 1.0);
        SparseDistribution {
            masses,
            pruned_mass: 0.0,
            step: 0,
        }
    }

    pub fn from_parts(masses: FxHashMap<NormalForm, f64>, pruned_mass: f64, step: usize) -> Self {
        SparseDistribution {
            masses,
            pruned_mass,
            step,
        }
    }

    pub fn get(&self, x: &NormalForm) -> f64 {
        self.masses.get(x).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NormalForm, &f64)> {
        self.masses.iter()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Total mass removed by pruning so far; bounds the total-variation error.
    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn total_mass(&self) -> f64 {
        let mut v: Vec<f64> = self.masses.values().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.iter().sum()
    }

    pub fn max_mass(&self) -> f64 {
        self.masses.values().copied().fold(0.0, f64::max)
    }

    /// Entries sorted by normal form, for deterministic output.
    pub fn sorted(&self) -> Vec<(NormalForm, f64)> {
        let mut v: Vec<(NormalForm, f64)> = self.masses.iter().map(|(k, v)| (k.clone(), *v)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }
}

/// One convolution step `dist * mu` followed by pruning of atoms below
/// `prune_eps`.
pub fn convolve(
    dist: &SparseDistribution,
    mu: &FiniteMeasure,
    group: &Group,
    prune_eps: f64,
    cap: usize,
) -> Result<SparseDistribution> {
    // fixed summation order keeps results reproducible across thread counts
    let mut entries: Vec<(&NormalForm, f64)> = dist.masses.iter().map(|(x, &p)| (x, p)).collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let partials: Vec<FxHashMap<NormalForm, f64>> = entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut local: FxHashMap<NormalForm, f64> = FxHashMap::default();
            for &(x, p) in chunk {
                for (s, q) in mu.atoms() {
                    let y = if s.len() == 1 {
                        group.mul_letter(x, s.letters()[0])
                    } else {
                        group.mul_unchecked(x, s)
                    };
                    *local.entry(y).or_insert(0.0) += p * q;
                }
            }
            local
        })
        .collect();
    let mut out: FxHashMap<NormalForm, f64> = FxHashMap::default();
    for part in partials {
        if out.is_empty() {
            out = part;
            continue;
        }
        for (k, v) in part {
            *out.entry(k).or_insert(0.0) += v;
        }
    }
    let mut pruned = dist.pruned_mass;
    if prune_eps > 0.0 {
        let mut dropped: Vec<f64> = Vec::new();
        out.retain(|_, v| {
            if *v < prune_eps {
                dropped.push(*v);
                false
            } else {
                true
            }
        });
        dropped.sort_by(|a, b| a.total_cmp(b));
        pruned += dropped.iter().sum::<f64>();
    }
    if out.len() > cap {
        return Err(Error::Resource(format!(
            "support of {} atoms at step {} exceeds the cap of {cap}; use a larger prune_eps",
            out.len(),
            dist.step + 1
        )));
    }
    Ok(SparseDistribution {
        masses: out,
        pruned_mass: pruned,
        step: dist.step + 1,
    })
}

/// Distributions μ^{*0}, ..., μ^{*n}.
pub fn convolution_powers(
    mu: &FiniteMeasure,
    group: &Group,
    n: usize,
    prune_eps: f64,
    cap: usize,
) -> Result<Vec<SparseDistribution>> {
    let mut out = vec![SparseDistribution::delta(group)];
    for _ in 0..n {
        let next = convolve(out.last().unwrap(), mu, group, prune_eps, cap)?;
        out.push(next);
    }
    Ok(out)
}
