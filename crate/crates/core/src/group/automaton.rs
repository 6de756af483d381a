//! Geodesic automata: finite labeled digraphs whose paths from the start
//! state are in bijection with group elements through geodesic words.

use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use super::{estimate_delta, Group, Letter, NormalForm};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AutomatonEdge {
    pub from: usize,
    pub label: Letter,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ConstructionMethod {
    /// Closed-form construction from the normal-form grammar.
    Exact,
    /// Empirical cone types computed to the given cone radius.
    ConeType { cone_radius: usize },
    /// Read from a file.
    File,
    /// Assembled by hand (test fixtures, constructed examples).
    Manual,
}

#[derive(Clone, Debug)]
pub struct BuildParams {
    /// Radius to which the result is validated before being returned.
    pub verify_radius: usize,
    /// Continuation depth used to separate cone types; `None` picks
    /// `2·δ_est + 2`.
    pub cone_radius: Option<usize>,
    /// Elements up to this length are used to discover cone types.
    pub discovery_radius: usize,
    pub state_cap: usize,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            verify_radius: 8,
            cone_radius: None,
            discovery_radius: 4,
            state_cap: 10_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicAutomaton {
    num_states: usize,
    start: usize,
    edges: Vec<AutomatonEdge>,
    #[serde(skip)]
    out: Vec<Vec<usize>>,
    pub group_hash: Option<String>,
    pub method: ConstructionMethod,
    pub verification_radius: usize,
}

/// Per-radius comparison between path counts and sphere counts.
#[derive(Clone, Debug, Serialize)]
pub struct RadiusCheck {
    pub n: usize,
    pub paths: usize,
    pub sphere: usize,
    pub injective: bool,
    pub missing: usize,
    pub extraneous: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub radius: usize,
    pub per_radius: Vec<RadiusCheck>,
    pub counterexamples: Vec<String>,
    pub pass: bool,
}

const MAX_COUNTEREXAMPLES: usize = 32;

impl GeodesicAutomaton {
    /// Assemble an automaton from an explicit edge list.
    pub fn from_edges(num_states: usize, start: usize, edges: Vec<AutomatonEdge>) -> Result<Self> {
        if start >= num_states {
            return Err(Error::Parse(format!("start state {start} out of range")));
        }
        if let Some(e) = edges.iter().find(|e| e.from >= num_states || e.to >= num_states) {
            return Err(Error::Parse(format!("edge {e:?} references a missing state")));
        }
        let mut aut = GeodesicAutomaton {
            num_states,
            start,
            edges,
            out: Vec::new(),
            group_hash: None,
            method: ConstructionMethod::Manual,
            verification_radius: 0,
        };
        aut.rebuild_index();
        Ok(aut)
    }

    fn rebuild_index(&mut self) {
        let mut out = vec![Vec::new(); self.num_states];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.from].push(i);
        }
        self.out = out;
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn edges(&self) -> &[AutomatonEdge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &AutomatonEdge {
        &self.edges[id]
    }

    /// Ids of edges leaving `state`.
    pub fn out_edges(&self, state: usize) -> &[usize] {
        &self.out[state]
    }

    /// Adjacency lists of the underlying digraph.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_states];
        for e in &self.edges {
            adj[e.from].push(e.to);
        }
        adj
    }

    /// Copy with one edge removed.
    pub fn without_edge(&self, id: usize) -> Self {
        let mut a = self.clone();
        a.edges.remove(id);
        a.rebuild_index();
        a.verification_radius = 0;
        a
    }

    /// States reachable from the start state.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(s) = stack.pop() {
            for &e in &self.out[s] {
                let t = self.edges[e].to;
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Number of paths of length `n` from the start state, for n ≤ n_max.
    pub fn path_counts(&self, n_max: usize) -> Vec<u128> {
        let mut cur = vec![0u128; self.num_states];
        cur[self.start] = 1;
        let mut counts = vec![1u128];
        for _ in 0..n_max {
            let mut next = vec![0u128; self.num_states];
            for e in &self.edges {
                next[e.to] += cur[e.from];
            }
            counts.push(next.iter().sum());
            cur = next;
        }
        counts
    }

    /// Build the automaton for a group.
    pub fn build(group: &Group, params: &BuildParams) -> Result<Self> {
        let mut aut = if group.is_free() || group.is_free_product() || group.is_lattice() {
            let mut a = Self::exact(group);
            a.method = ConstructionMethod::Exact;
            a
        } else {
            Self::cone_types(group, params)?
        };
        aut.group_hash = Some(group.hash().to_string());
        let report = aut.validate(group, params.verify_radius)?;
        if !report.pass {
            return Err(Error::NonConvergence(format!(
                "automaton failed validation at radius {}: {}",
                params.verify_radius,
                report.counterexamples.join("; ")
            )));
        }
        Ok(aut)
    }

    fn exact(group: &Group) -> Self {
        let alphabet = group.alphabet();
        let mut edges = Vec::new();
        if group.is_free() {
            // state l+1 remembers the last letter l
            for l in alphabet.letters() {
                edges.push(AutomatonEdge {
                    from: 0,
                    label: l,
                    to: l as usize + 1,
                });
                for t in alphabet.letters() {
                    if t != alphabet.inverse(l) {
                        edges.push(AutomatonEdge {
                            from: l as usize + 1,
                            label: t,
                            to: t as usize + 1,
                        });
                    }
                }
            }
            return Self::from_edges(alphabet.len() + 1, 0, edges).expect("valid free automaton");
        }
        if group.is_lattice() {
            for l in alphabet.letters() {
                edges.push(AutomatonEdge {
                    from: 0,
                    label: l,
                    to: l as usize + 1,
                });
                for t in alphabet.letters() {
                    if t == l || t / 2 > l / 2 {
                        edges.push(AutomatonEdge {
                            from: l as usize + 1,
                            label: t,
                            to: t as usize + 1,
                        });
                    }
                }
            }
            return Self::from_edges(alphabet.len() + 1, 0, edges).expect("valid lattice automaton");
        }
        // free product: a state per (letter, run length)
        let orders = group.factor_orders().expect("free product").to_vec();
        let max_run = |l: Letter| -> usize {
            let (f, d) = group.letter_factor(l).expect("factor");
            let m = orders[f] as usize;
            if d > 0 {
                m / 2
            } else {
                (m - 1) / 2
            }
        };
        let mut state_of: FxHashMap<(Letter, usize), usize> = FxHashMap::default();
        let mut n = 1;
        for l in alphabet.letters() {
            for c in 1..=max_run(l) {
                state_of.insert((l, c), n);
                n += 1;
            }
        }
        for l in alphabet.letters() {
            edges.push(AutomatonEdge {
                from: 0,
                label: l,
                to: state_of[&(l, 1)],
            });
        }
        for l in alphabet.letters() {
            let (fl, _) = group.letter_factor(l).unwrap();
            for c in 1..=max_run(l) {
                let from = state_of[&(l, c)];
                if c < max_run(l) {
                    edges.push(AutomatonEdge {
                        from,
                        label: l,
                        to: state_of[&(l, c + 1)],
                    });
                }
                for t in alphabet.letters() {
                    if group.letter_factor(t).unwrap().0 != fl {
                        edges.push(AutomatonEdge {
                            from,
                            label: t,
                            to: state_of[&(t, 1)],
                        });
                    }
                }
            }
        }
        Self::from_edges(n, 0, edges).expect("valid free product automaton")
    }

    /// Words w with |w| ≤ depth such that nf(g)·w is again a normal form.
    fn cone_signature(group: &Group, g: &NormalForm, depth: usize) -> Vec<Vec<Letter>> {
        let mut out = Vec::new();
        let mut stack: Vec<(NormalForm, Vec<Letter>)> = vec![(g.clone(), Vec::new())];
        while let Some((x, w)) = stack.pop() {
            out.push(w.clone());
            if w.len() == depth {
                continue;
            }
            for l in group.alphabet().letters() {
                let y = group.mul_letter(&x, l);
                if y.len() == x.len() + 1 && y.letters()[..x.len()] == *x.letters() && y.letters()[x.len()] == l {
                    let mut w2 = w.clone();
                    w2.push(l);
                    stack.push((y, w2));
                }
            }
        }
        out.sort();
        out
    }

    fn cone_types(group: &Group, params: &BuildParams) -> Result<Self> {
        let dv = group.validate_dehn(params.discovery_radius.min(4))?;
        if !dv.pass {
            return Err(Error::Unsupported(format!(
                "normal forms are not geodesic (enumeration-only mode): {:?}",
                dv.length_mismatches.first()
            )));
        }
        let cone_radius = match params.cone_radius {
            Some(k) => k,
            None => {
                let d = estimate_delta(group, 3, 400, 0x5eed)?;
                (2.0 * d).ceil() as usize + 2
            }
        };
        let v = params.discovery_radius;
        let layers = group.spheres(v)?;
        let mut sig_id: FxHashMap<Vec<Vec<Letter>>, usize> = FxHashMap::default();
        let mut state_of: FxHashMap<NormalForm, usize> = FxHashMap::default();
        let mut first_seen: Vec<usize> = Vec::new();
        for (k, layer) in layers.iter().enumerate() {
            for g in layer {
                let sig = Self::cone_signature(group, g, cone_radius);
                let next = sig_id.len();
                let id = *sig_id.entry(sig).or_insert(next);
                if id == first_seen.len() {
                    first_seen.push(k);
                }
                state_of.insert(g.clone(), id);
                if sig_id.len() > params.state_cap {
                    return Err(Error::NonConvergence(format!(
                        "more than {} cone types at radius {k}",
                        params.state_cap
                    )));
                }
            }
        }
        let late: Vec<usize> = (0..first_seen.len()).filter(|&s| first_seen[s] == v).collect();
        if !late.is_empty() {
            return Err(Error::NonConvergence(format!(
                "{} cone types first appear at the discovery radius {v} (cone radius {cone_radius}); \
                 the type set has not stabilized",
                late.len()
            )));
        }
        let mut trans: FxHashMap<(usize, Letter), usize> = FxHashMap::default();
        let mut conflicts = 0usize;
        for layer in layers.iter().take(v) {
            for g in layer {
                let s = state_of[g];
                for l in group.alphabet().letters() {
                    let y = group.mul_letter(g, l);
                    if y.len() == g.len() + 1 && y.letters()[..g.len()] == *g.letters() {
                        let t = state_of[&y];
                        match trans.insert((s, l), t) {
                            Some(prev) if prev != t => conflicts += 1,
                            _ => {}
                        }
                    }
                }
            }
        }
        if conflicts > 0 {
            return Err(Error::NonConvergence(format!(
                "{conflicts} inconsistent transitions with cone radius {cone_radius}; \
                 increase the cone radius"
            )));
        }
        let mut edges: Vec<AutomatonEdge> = trans
            .into_iter()
            .map(|((from, label), to)| AutomatonEdge { from, label, to })
            .collect();
        edges.sort_by_key(|e| (e.from, e.label));
        let start = state_of[&group.identity()];
        let mut aut = Self::from_edges(sig_id.len(), start, edges)?;
        aut.method = ConstructionMethod::ConeType { cone_radius };
        Ok(aut)
    }

    /// Check the path/element bijection against an independent sphere
    /// enumeration up to radius `radius`.
    pub fn validate(&self, group: &Group, radius: usize) -> Result<ValidationReport> {
        let spheres = group.spheres(radius)?;
        let mut per_radius = Vec::new();
        let mut counterexamples = Vec::new();
        let reach = self.reachable();
        for (s, r) in reach.iter().enumerate() {
            if !r && counterexamples.len() < MAX_COUNTEREXAMPLES {
                counterexamples.push(format!("state {s} is not reachable from the start"));
            }
        }
        let mut frontier: Vec<(usize, Vec<Letter>)> = vec![(self.start, Vec::new())];
        for (n, sphere) in spheres.iter().enumerate() {
            if n > 0 {
                let mut next = Vec::with_capacity(frontier.len() * 2);
                for (s, w) in &frontier {
                    for &e in &self.out[*s] {
                        let edge = &self.edges[e];
                        let mut w2 = w.clone();
                        w2.push(edge.label);
                        next.push((edge.to, w2));
                    }
                }
                frontier = next;
            }
            let sphere_set: FxHashSet<&NormalForm> = sphere.iter().collect();
            let mut images: FxHashSet<NormalForm> = FxHashSet::default();
            let mut injective = true;
            let mut extraneous = 0;
            for (_, w) in &frontier {
                let x = group.normalize(w)?;
                if !sphere_set.contains(&x) {
                    extraneous += 1;
                    if counterexamples.len() < MAX_COUNTEREXAMPLES {
                        counterexamples.push(format!(
                            "path {} reaches {} which is not in S_{n}",
                            group.format_word(w),
                            group.format(&x)
                        ));
                    }
                }
                if !images.insert(x.clone()) {
                    injective = false;
                    if counterexamples.len() < MAX_COUNTEREXAMPLES {
                        counterexamples.push(format!(
                            "element {} is reached by two paths of length {n}",
                            group.format(&x)
                        ));
                    }
                }
            }
            let mut missing = 0;
            for x in sphere {
                if !images.contains(x) {
                    missing += 1;
                    if counterexamples.len() < MAX_COUNTEREXAMPLES {
                        counterexamples.push(format!(
                            "missing element {} of S_{n}",
                            group.format(x)
                        ));
                    }
                }
            }
            per_radius.push(RadiusCheck {
                n,
                paths: frontier.len(),
                sphere: sphere.len(),
                injective,
                missing,
                extraneous,
            });
        }
        let pass = counterexamples.is_empty()
            && per_radius
                .iter()
                .all(|c| c.injective && c.missing == 0 && c.extraneous == 0 && c.paths == c.sphere);
        Ok(ValidationReport {
            radius,
            per_radius,
            counterexamples,
            pass,
        })
    }

    /// Validate and record the verified radius on success.
    pub fn validate_and_record(&mut self, group: &Group, radius: usize) -> Result<ValidationReport> {
        let report = self.validate(group, radius)?;
        if report.pass {
            self.verification_radius = self.verification_radius.max(radius);
        }
        Ok(report)
    }

    /// Line-oriented text encoding: `states N start I` then `from label to`.
    pub fn to_text(&self, group: &Group) -> String {
        let mut s = String::new();
        if let Some(h) = &self.group_hash {
            let _ = writeln!(s, "# group {h}");
        }
        let _ = writeln!(s, "# verification radius {}", self.verification_radius);
        let _ = writeln!(s, "states {} start {}", self.num_states, self.start);
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.from, group.alphabet().name(e.label), e.to);
        }
        s
    }

    pub fn from_text(text: &str, group: &Group) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("line {}: {raw:?}", lineno + 1));
            if header.is_none() {
                match toks.as_slice() {
                    ["states", n, "start", i] => {
                        header = Some((n.parse().map_err(|_| bad())?, i.parse().map_err(|_| bad())?));
                    }
                    _ => return Err(bad()),
                }
                continue;
            }
            match toks.as_slice() {
                [from, label, to] => {
                    let l = group
                        .alphabet()
                        .lookup(label)
                        .ok_or_else(|| Error::Alphabet(label.to_string()))?;
                    edges.push(AutomatonEdge {
                        from: from.parse().map_err(|_| bad())?,
                        label: l,
                        to: to.parse().map_err(|_| bad())?,
                    });
                }
                _ => return Err(bad()),
            }
        }
        let (n, start) = header.ok_or_else(|| Error::Parse("missing `states N start I` header".into()))?;
        let mut aut = Self::from_edges(n, start, edges)?;
        aut.method = ConstructionMethod::File;
        aut.group_hash = Some(group.hash().to_string());
        Ok(aut)
    }
}
