//! The subshift of a geodesic automaton: component structure, cylinder
//! potentials, transfer operators and pressure.

mod perron;
mod potential;

pub use perron::{
    eigenmeasure_check, jordan_growth_probe, operator_sphere_sums, pressure_component, pressure_curve,
    semisimplicity_check, sqrt_law_fit, JordanReport, PerronData, PressureCurve, PressureRow, Semisimplicity,
};
pub use potential::{build_phi_r, CylinderPotential};

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::group::GeodesicAutomaton;

#[derive(Clone, Debug, Serialize)]
pub struct Component {
    /// States, sorted.
    pub states: Vec<usize>,
    /// gcd of cycle lengths; 0 for a single state without a loop.
    pub period: usize,
    /// Cyclic classes C_0..C_{p−1}; one edge step moves C_j into C_{j+1 mod p}.
    pub classes: Vec<Vec<usize>>,
}

impl Component {
    pub fn is_trivial(&self) -> bool {
        self.period == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentDag {
    /// Ordered by smallest contained state.
    pub components: Vec<Component>,
    /// Component of each state.
    pub component_of: Vec<usize>,
    /// Distinct edges (i, j), i ≠ j, between components.
    pub edges: Vec<(usize, usize)>,
}

impl ComponentDag {
    /// Whether component j can be reached from component i by a nonempty path.
    pub fn reaches(&self, i: usize, j: usize) -> bool {
        let mut seen = vec![false; self.components.len()];
        let mut stack = vec![i];
        while let Some(c) = stack.pop() {
            for &(a, b) in &self.edges {
                if a == c && !seen[b] {
                    if b == j {
                        return true;
                    }
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Strongly connected components, their condensation and periods.
pub fn scc_decompose(aut: &GeodesicAutomaton) -> ComponentDag {
    let n = aut.num_states();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, aut.edges().len());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for e in aut.edges() {
        graph.add_edge(nodes[e.from], nodes[e.to], ());
    }
    let mut sccs: Vec<Vec<usize>> = kosaraju_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|i| i.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    sccs.sort_by_key(|c| c[0]);
    let mut component_of = vec![0; n];
    for (i, c) in sccs.iter().enumerate() {
        for &s in c {
            component_of[s] = i;
        }
    }
    let adj = aut.adjacency();
    let components = sccs
        .into_iter()
        .enumerate()
        .map(|(ci, states)| {
            // BFS levels inside the component; period = gcd of level defects
            let mut level = vec![usize::MAX; n];
            level[states[0]] = 0;
            let mut queue = std::collections::VecDeque::from([states[0]]);
            let mut period = 0;
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if component_of[v] != ci {
                        continue;
                    }
                    if level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    } else {
                        period = gcd(period, (level[u] + 1).abs_diff(level[v]));
                    }
                }
            }
            let classes = if period == 0 {
                vec![states.clone()]
            } else {
                let mut cls = vec![Vec::new(); period];
                for &s in &states {
                    cls[level[s] % period].push(s);
                }
                cls
            };
            Component {
                states,
                period,
                classes,
            }
        })
        .collect();
    let mut edges: Vec<(usize, usize)> = aut
        .edges()
        .iter()
        .map(|e| (component_of[e.from], component_of[e.to]))
        .filter(|(a, b)| a != b)
        .collect();
    edges.sort_unstable();
    edges.dedup();
    ComponentDag {
        components,
        component_of,
        edges,
    }
}
