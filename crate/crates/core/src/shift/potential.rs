use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{h_kernel, GreenOracle};
use crate::group::{GeodesicAutomaton, Group, Letter, NormalForm};

/// A potential that depends on the first `depth` edges of a path.
///
/// Cells are the admissible edge words of length 1..=depth starting at a
/// reachable state; shorter cells stand for paths that end early.
#[derive(Clone, Debug, Serialize)]
pub struct CylinderPotential {
    pub depth: usize,
    pub cells: Vec<Vec<usize>>,
    pub values: Vec<f64>,
    #[serde(skip)]
    index: FxHashMap<Vec<usize>, usize>,
    /// variation[j − 1] = max |φ(c) − φ(c')| over full-depth cells sharing
    /// their first j edges, for j = 1..depth.
    pub variation: Vec<f64>,
    /// Geometric decay rate of the variation table, when it can be fitted.
    pub holder_rate: Option<f64>,
    /// max |φ_{m+1} − φ_m| over cells of length m + 1, when computed.
    pub refinement_change: Option<f64>,
}

/// Edge words of length 1..=depth from reachable states, in DFS order.
pub(crate) fn edge_words(aut: &GeodesicAutomaton, depth: usize) -> Vec<Vec<usize>> {
    let reach = aut.reachable();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = Vec::new();
    for s in (0..aut.num_states()).rev().filter(|&s| reach[s]) {
        for &e in aut.out_edges(s).iter().rev() {
            stack.push(vec![e]);
        }
    }
    while let Some(w) = stack.pop() {
        if w.len() < depth {
            let last = aut.edge(*w.last().unwrap()).to;
            for &e in aut.out_edges(last).iter().rev() {
                let mut next = w.clone();
                next.push(e);
                stack.push(next);
            }
        }
        out.push(w);
    }
    out
}

impl CylinderPotential {
    pub fn from_fn(aut: &GeodesicAutomaton, depth: usize, mut f: impl FnMut(&[usize]) -> Result<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Precondition("cylinder depth must be at least 1".into()));
        }
        let cells = edge_words(aut, depth);
        let values = cells.iter().map(|c| f(c)).collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precision("potential has non-finite cylinder values".into()));
        }
        Ok(Self::assemble(depth, cells, values))
    }

    pub fn constant(aut: &GeodesicAutomaton, depth: usize, c: f64) -> Result<Self> {
        Self::from_fn(aut, depth, |_| Ok(c))
    }

    fn assemble(depth: usize, cells: Vec<Vec<usize>>, values: Vec<f64>) -> Self {
        let index = cells.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        let mut variation = Vec::with_capacity(depth);
        for j in 1..=depth {
            let mut span: FxHashMap<&[usize], (f64, f64)> = FxHashMap::default();
            for (c, &v) in cells.iter().zip(&values) {
                if c.len() == depth {
                    let e = span.entry(&c[..j]).or_insert((v, v));
                    e.0 = e.0.min(v);
                    e.1 = e.1.max(v);
                }
            }
            variation.push(span.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max));
        }
        let holder_rate = {
            let pts: Vec<(f64, f64)> = variation
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > 0.0)
                .map(|(j, v)| ((j + 1) as f64, v.ln()))
                .collect();
            if pts.len() >= 2 {
                let n = pts.len() as f64;
                let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                Some((sxy / sxx).exp())
            } else {
                None
            }
        };
        CylinderPotential {
            depth,
            cells,
            values,
            index,
            variation,
            holder_rate,
            refinement_change: None,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_index(&self, word: &[usize]) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// φ on a path, read from its first `depth` edges.
    pub fn value(&self, path: &[usize]) -> Option<f64> {
        let k = path.len().min(self.depth);
        self.cell_index(&path[..k]).map(|i| self.values[i])
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::MIN, f64::max)
    }
}

/// Largest admissible width of log H before the potential is refused.
const LOG_WIDTH_LIMIT: f64 = 1e-6;

/// φ_r(ω) = log H_r(e, α(ω)) − log H_r(e, α(σω)) on the cylinders of depth m,
/// where α reads the edge labels as a word.
pub fn build_phi_r(aut: &GeodesicAutomaton, oracle: &dyn GreenOracle, r: f64, depth: usize) -> Result<CylinderPotential> {
    let group = oracle.group();
    let e = group.identity();
    let mut cache: FxHashMap<NormalForm, f64> = FxHashMap::default();
    let mut log_h = |x: NormalForm| -> Result<f64> {
        if let Some(&v) = cache.get(&x) {
            return Ok(v);
        }
        let h = h_kernel(oracle, &e, &x, r)?.interval();
        let width = (h.hi / h.lo).ln();
        if !(h.lo > 0.0) || width > LOG_WIDTH_LIMIT {
            return Err(Error::Precision(format!(
                "H_r(e, {}) = [{}, {}] is too wide for the potential",
                group.format(&x),
                h.lo,
                h.hi
            )));
        }
        let v = h.mid().ln();
        cache.insert(x, v);
        Ok(v)
    };
    let element = |w: &[usize]| -> Result<NormalForm> { word_element(aut, group, w) };
    let mut phi = |w: &[usize]| -> Result<f64> { Ok(log_h(element(w)?)? - log_h(element(&w[1..])?)?) };
    let mut refined = 0.0f64;
    let mut coarse: FxHashMap<Vec<usize>, f64> = FxHashMap::default();
    for w in edge_words(aut, depth + 1) {
        let v = phi(&w)?;
        if w.len() <= depth {
            coarse.insert(w, v);
        } else {
            refined = refined.max((v - coarse[&w[..depth]]).abs());
        }
    }
    let mut pot = CylinderPotential::from_fn(aut, depth, |w| Ok(coarse[w]))?;
    pot.refinement_change = Some(refined);
    Ok(pot)
}

fn word_element(aut: &GeodesicAutomaton, group: &Group, w: &[usize]) -> Result<NormalForm> {
    let letters: Vec<Letter> = w.iter().map(|&e| aut.edge(e).label).collect();
    group.normalize(&letters)
}
