use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Group, GroupSpec, NormalForm};

/// Atoms of a measure as (word, weight) pairs, as read from a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub atoms: Vec<(String, f64)>,
    /// Reject weights that do not sum to 1 instead of renormalizing.
    #[serde(default)]
    pub strict: bool,
    /// Ball radius used to verify that the support generates the group.
    #[serde(default)]
    pub admissibility_radius: Option<usize>,
}

impl MeasureSpec {
    pub fn new(atoms: Vec<(String, f64)>) -> Self {
        MeasureSpec {
            atoms,
            strict: false,
            admissibility_radius: None,
        }
    }

    /// Simple random walk: uniform on the generating alphabet.
    pub fn simple(group: &Group) -> Self {
        let k = group.alphabet().len();
        Self::new(
            group
                .alphabet()
                .letters()
                .map(|l| (group.alphabet().name(l).to_string(), 1.0 / k as f64))
                .collect(),
        )
    }

    /// Lazy version of the simple random walk holding with probability `hold`.
    pub fn lazy(group: &Group, hold: f64) -> Self {
        let mut spec = Self::simple(group);
        for a in spec.atoms.iter_mut() {
            a.1 *= 1.0 - hold;
        }
        spec.atoms.push(("e".into(), hold));
        spec
    }

    /// Drift measure on a free group: `a` with 1 − 3ε, the other letters ε each.
    pub fn biased_free(eps: f64) -> Self {
        Self::new(vec![
            ("a".into(), 1.0 - 3.0 * eps),
            ("A".into(), eps),
            ("b".into(), eps),
            ("B".into(), eps),
        ])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    Aperiodic,
    Period2,
}

/// Finitely supported probability measure on a group.
#[derive(Clone, Debug)]
pub struct FiniteMeasure {
    atoms: Vec<(NormalForm, f64)>,
    index: FxHashMap<NormalForm, f64>,
    admissible: bool,
    symmetric: bool,
    parity: Parity,
    max_step: usize,
    hash: String,
}

pub const DEFAULT_ADMISSIBILITY_RADIUS: usize = 6;

impl FiniteMeasure {
    pub fn atoms(&self) -> &[(NormalForm, f64)] {
        &self.atoms
    }

    pub fn weight(&self, x: &NormalForm) -> f64 {
        self.index.get(x).copied().unwrap_or(0.0)
    }

    pub fn is_admissible(&self) -> bool {
        self.admissible
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Longest atom.
    pub fn max_step(&self) -> usize {
        self.max_step
    }

    /// Content hash of the atoms and weights.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Weight of the identity atom.
    pub fn holding(&self) -> f64 {
        self.atoms
            .iter()
            .find(|(x, _)| x.is_identity())
            .map_or(0.0, |a| a.1)
    }
}

/// Parse, normalize and classify a measure.
pub fn make_measure(spec: &MeasureSpec, group: &Group) -> Result<FiniteMeasure> {
    if spec.atoms.is_empty() {
        return Err(Error::Measure("empty support".into()));
    }
    let mut merged: Vec<(NormalForm, f64)> = Vec::new();
    for (w, p) in &spec.atoms {
        if !(p.is_finite() && *p > 0.0) {
            return Err(Error::Measure(format!("weight {p} of atom {w:?} is not positive")));
        }
        let x = group.element(w)?;
        match merged.iter_mut().find(|(y, _)| *y == x) {
            Some(a) => a.1 += p,
            None => merged.push((x, *p)),
        }
    }
    let total: f64 = merged.iter().map(|a| a.1).sum();
    if (total - 1.0).abs() > 1e-12 {
        if spec.strict {
            return Err(Error::Measure(format!("weights sum to {total}, not 1")));
        }
        log::warn!("measure weights sum to {total}; renormalizing");
        for a in merged.iter_mut() {
            a.1 /= total;
        }
    }
    let index: FxHashMap<NormalForm, f64> = merged.iter().cloned().collect();
    let symmetric = merged
        .iter()
        .all(|(x, p)| index.get(&group.inv(x)).is_some_and(|q| q == p));
    let radius = spec
        .admissibility_radius
        .unwrap_or(DEFAULT_ADMISSIBILITY_RADIUS);
    let admissible = generates_semigroup(group, &merged, radius);
    let all_odd = merged.iter().all(|(x, _)| x.len() % 2 == 1);
    let parity = if all_odd && length_parity_is_invariant(group) {
        Parity::Period2
    } else {
        Parity::Aperiodic
    };
    let max_step = merged.iter().map(|a| a.0.len()).max().unwrap_or(0);
    let mut key = group.hash().to_string();
    for (x, p) in &merged {
        key.push_str(&format!("|{}:{:016x}", group.format(x), p.to_bits()));
    }
    let hash = crate::io::short_hash(key.as_bytes());
    Ok(FiniteMeasure {
        atoms: merged,
        index,
        admissible,
        symmetric,
        parity,
        max_step,
        hash,
    })
}

/// Whether word length mod 2 is a homomorphism to Z/2, i.e. the Cayley
/// graph has no odd cycles. Exact for every built-in group kind.
fn length_parity_is_invariant(group: &Group) -> bool {
    match group.spec() {
        GroupSpec::Free { .. } | GroupSpec::Lattice { .. } => true,
        GroupSpec::FreeProduct { orders } => orders.iter().all(|m| m % 2 == 0),
        GroupSpec::DehnPresentation { relators, .. } => relators
            .iter()
            .all(|r| r.chars().filter(|c| !c.is_whitespace()).count() % 2 == 0),
    }
}

/// Every generator is a product of support elements whose partial products
/// stay inside the ball of the given radius.
fn generates_semigroup(group: &Group, atoms: &[(NormalForm, f64)], radius: usize) -> bool {
    let targets: FxHashSet<NormalForm> = group
        .alphabet()
        .letters()
        .map(|l| group.mul_letter(&group.identity(), l))
        .collect();
    let mut seen: FxHashSet<NormalForm> = FxHashSet::default();
    let mut frontier: Vec<NormalForm> = Vec::new();
    for (x, _) in atoms {
        if x.len() <= radius && seen.insert(x.clone()) {
            frontier.push(x.clone());
        }
    }
    let mut found = targets.iter().filter(|t| seen.contains(*t)).count();
    while found < targets.len() && !frontier.is_empty() {
        let mut next = Vec::new();
        for y in &frontier {
            for (s, _) in atoms {
                let z = group.mul_unchecked(y, s);
                if z.len() <= radius && seen.insert(z.clone()) {
                    if targets.contains(&z) {
                        found += 1;
                    }
                    next.push(z);
                }
            }
        }
        frontier = next;
    }
    found == targets.len()
}
