//! Dehn's algorithm for small-cancellation presentations.

use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;
use smallvec::SmallVec;

use super::{Alphabet, Group, Letter};
use crate::error::{Error, Result};

/// Cap on the number of equal-length rewrites explored per canonicalization.
const CLOSURE_CAP: usize = 4096;

#[derive(Clone, Debug)]
pub(crate) struct DehnData {
    /// Cyclic permutations of every relator and of its inverse.
    symmetrized: Vec<Vec<Letter>>,
    /// Longest piece of the symmetrized set.
    pub(crate) max_piece: usize,
    /// Exponent sums are group invariants when every relator has zero sums.
    exponent_sums_invariant: bool,
}

fn invert(alphabet: &Alphabet, w: &[Letter]) -> Vec<Letter> {
    w.iter().rev().map(|&l| alphabet.inverse(l)).collect()
}

fn free_reduce(alphabet: &Alphabet, w: &mut Vec<Letter>) {
    let mut out: Vec<Letter> = Vec::with_capacity(w.len());
    for &l in w.iter() {
        if out.last() == Some(&alphabet.inverse(l)) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    *w = out;
}

impl DehnData {
    pub(crate) fn new(alphabet: &Alphabet, relators: &[String]) -> Result<Self> {
        if relators.is_empty() {
            return Err(Error::Presentation("no relators given".into()));
        }
        let mut parsed: Vec<Vec<Letter>> = Vec::new();
        for r in relators {
            let mut w = Vec::new();
            for c in r.chars().filter(|c| !c.is_whitespace()) {
                let l = alphabet
                    .lookup(&c.to_string())
                    .ok_or_else(|| Error::Alphabet(c.to_string()))?;
                w.push(l);
            }
            if w.is_empty() {
                return Err(Error::Presentation("empty relator".into()));
            }
            let cyclically_reduced = w
                .windows(2)
                .all(|p| p[1] != alphabet.inverse(p[0]))
                && w[0] != alphabet.inverse(*w.last().unwrap());
            if !cyclically_reduced {
                return Err(Error::Presentation(format!(
                    "relator {r:?} is not cyclically reduced"
                )));
            }
            parsed.push(w);
        }
        let mut symmetrized: Vec<Vec<Letter>> = Vec::new();
        for w in &parsed {
            for base in [w.clone(), invert(alphabet, w)] {
                for k in 0..base.len() {
                    let mut rot = base[k..].to_vec();
                    rot.extend_from_slice(&base[..k]);
                    if !symmetrized.contains(&rot) {
                        symmetrized.push(rot);
                    }
                }
            }
        }
        let mut max_piece = 0;
        for (i, s) in symmetrized.iter().enumerate() {
            for t in &symmetrized[i + 1..] {
                let p = s.iter().zip(t).take_while(|(a, b)| a == b).count();
                max_piece = max_piece.max(p);
                if 2 * p >= s.len().min(t.len()) {
                    return Err(Error::Presentation(format!(
                        "piece of length {p} is not shorter than half a relator; \
                         Dehn reduction would be unsound"
                    )));
                }
            }
        }
        let n_gen = alphabet.len() / 2;
        let exponent_sums_invariant = parsed.iter().all(|w| {
            let mut sums = vec![0i64; n_gen];
            for &l in w {
                sums[(l / 2) as usize] += if l % 2 == 0 { 1 } else { -1 };
            }
            sums.iter().all(|&s| s == 0)
        });
        Ok(DehnData {
            symmetrized,
            max_piece,
            exponent_sums_invariant,
        })
    }

    /// Repeatedly replace the leftmost subword that is more than half of a
    /// symmetrized relator by the shorter complement.
    pub(crate) fn reduce(&self, alphabet: &Alphabet, word: &[Letter]) -> Vec<Letter> {
        let mut w = word.to_vec();
        loop {
            free_reduce(alphabet, &mut w);
            let mut hit: Option<(usize, usize, usize)> = None;
            'scan: for i in 0..w.len() {
                let mut best: Option<(usize, usize)> = None;
                for (si, s) in self.symmetrized.iter().enumerate() {
                    let l = w[i..].iter().zip(s).take_while(|(a, b)| a == b).count();
                    if 2 * l > s.len() && best.is_none_or(|(bl, _)| l > bl) {
                        best = Some((l, si));
                    }
                }
                if let Some((l, si)) = best {
                    hit = Some((i, l, si));
                    break 'scan;
                }
            }
            match hit {
                None => return w,
                Some((i, l, si)) => {
                    let s = &self.symmetrized[si];
                    let repl = invert(alphabet, &s[l..]);
                    let mut nw = Vec::with_capacity(w.len() - l + repl.len());
                    nw.extend_from_slice(&w[..i]);
                    nw.extend_from_slice(&repl);
                    nw.extend_from_slice(&w[i + l..]);
                    w = nw;
                }
            }
        }
    }

    pub(crate) fn words_equal(&self, alphabet: &Alphabet, u: &[Letter], v: &[Letter]) -> bool {
        let mut w = invert(alphabet, u);
        w.extend_from_slice(v);
        self.reduce(alphabet, &w).is_empty()
    }

    /// Shortlex-least word among the Dehn-reduced words reachable through
    /// half-relator swaps.
    pub(crate) fn canonical(&self, alphabet: &Alphabet, word: &[Letter]) -> SmallVec<[Letter; 16]> {
        let mut cur = self.reduce(alphabet, word);
        'restart: loop {
            let len = cur.len();
            let mut seen: FxHashSet<Vec<Letter>> = FxHashSet::default();
            seen.insert(cur.clone());
            let mut queue: VecDeque<Vec<Letter>> = VecDeque::new();
            queue.push_back(cur.clone());
            while let Some(u) = queue.pop_front() {
                for s in &self.symmetrized {
                    if s.len() % 2 != 0 {
                        continue;
                    }
                    let h = s.len() / 2;
                    if u.len() < h {
                        continue;
                    }
                    for i in 0..=(u.len() - h) {
                        if u[i..i + h] != s[..h] {
                            continue;
                        }
                        let mut v = Vec::with_capacity(u.len());
                        v.extend_from_slice(&u[..i]);
                        v.extend(invert(alphabet, &s[h..]));
                        v.extend_from_slice(&u[i + h..]);
                        let v = self.reduce(alphabet, &v);
                        if v.len() < len {
                            cur = v;
                            continue 'restart;
                        }
                        if v.len() == len && seen.len() < CLOSURE_CAP && seen.insert(v.clone()) {
                            queue.push_back(v);
                        }
                    }
                }
            }
            let best = seen.into_iter().min().unwrap_or_default();
            return SmallVec::from_vec(best);
        }
    }

    fn bucket_key(&self, n_gen: usize, w: &[Letter]) -> Vec<i64> {
        if !self.exponent_sums_invariant {
            return Vec::new();
        }
        let mut sums = vec![0i64; n_gen];
        for &l in w {
            sums[(l / 2) as usize] += if l % 2 == 0 { 1 } else { -1 };
        }
        sums
    }

    pub(crate) fn validate(&self, group: &Group, radius: usize) -> Result<DehnValidation> {
        let alphabet = group.alphabet();
        let n_gen = alphabet.len() / 2;
        // breadth-first search keyed only by the word problem
        let mut layers: Vec<Vec<Vec<Letter>>> = vec![vec![Vec::new()]];
        let mut buckets: Vec<FxHashMap<Vec<i64>, Vec<usize>>> = Vec::new();
        let mut b0: FxHashMap<Vec<i64>, Vec<usize>> = FxHashMap::default();
        b0.insert(self.bucket_key(n_gen, &[]), vec![0]);
        buckets.push(b0);
        for k in 0..radius {
            let mut next: Vec<Vec<Letter>> = Vec::new();
            let mut next_b: FxHashMap<Vec<i64>, Vec<usize>> = FxHashMap::default();
            for x in &layers[k] {
                for l in alphabet.letters() {
                    let mut w = x.clone();
                    w.push(l);
                    let y = self.reduce(alphabet, &w);
                    let key = self.bucket_key(n_gen, &y);
                    let seen_in = |layer: &Vec<Vec<Letter>>, b: &FxHashMap<Vec<i64>, Vec<usize>>| {
                        b.get(&key).is_some_and(|ids| {
                            ids.iter()
                                .any(|&i| self.words_equal(alphabet, &layer[i], &y))
                        })
                    };
                    if seen_in(&layers[k], &buckets[k])
                        || (k > 0 && seen_in(&layers[k - 1], &buckets[k - 1]))
                        || seen_in(&next, &next_b)
                    {
                        continue;
                    }
                    next_b.entry(key).or_default().push(next.len());
                    next.push(y);
                }
            }
            layers.push(next);
            buckets.push(next_b);
        }
        let bfs_sphere_sizes: Vec<usize> = layers.iter().map(|l| l.len()).collect();
        let mut length_mismatches = Vec::new();
        let mut duplicate_forms = Vec::new();
        let mut forms: FxHashSet<Vec<Letter>> = FxHashSet::default();
        for (k, layer) in layers.iter().enumerate() {
            for w in layer {
                let nf = group.normalize(w)?;
                if nf.len() != k {
                    length_mismatches.push(format!(
                        "{} has distance {k} but normal form {} of length {}",
                        group.format_word(w),
                        group.format(&nf),
                        nf.len()
                    ));
                }
                if !forms.insert(nf.letters().to_vec()) {
                    duplicate_forms.push(group.format(&nf));
                }
            }
        }
        let nf_sphere_sizes: Vec<usize> = group.spheres(radius)?.iter().map(|s| s.len()).collect();
        let pass = length_mismatches.is_empty()
            && duplicate_forms.is_empty()
            && nf_sphere_sizes == bfs_sphere_sizes;
        Ok(DehnValidation {
            radius,
            bfs_sphere_sizes,
            nf_sphere_sizes,
            length_mismatches,
            duplicate_forms,
            pass,
        })
    }
}

/// Outcome of checking canonical forms of a Dehn presentation against an
/// independent breadth-first search.
#[derive(Clone, Debug, Serialize)]
pub struct DehnValidation {
    pub radius: usize,
    pub bfs_sphere_sizes: Vec<usize>,
    pub nf_sphere_sizes: Vec<usize>,
    pub length_mismatches: Vec<String>,
    pub duplicate_forms: Vec<String>,
    /// True when normal-form lengths are geodesic up to `radius`.
    pub pass: bool,
}
