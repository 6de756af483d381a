use rayon::prelude::*;
use serde::Serialize;

use super::potential::CylinderPotential;
use super::{build_phi_r, scc_decompose, ComponentDag};
use crate::asymptotics::FitResult;
use crate::error::{Error, Result};
use crate::green::{GreenOracle, PropertyReport};
use crate::group::GeodesicAutomaton;
use crate::numeric::lstsq;

#[derive(Clone, Debug, Serialize)]
pub struct PerronData {
    pub component: usize,
    /// log of the Perron value.
    pub pressure: f64,
    /// Collatz–Wielandt bracket of the Perron value.
    pub perron_bracket: (f64, f64),
    pub period: usize,
    /// Indices of the full-depth cells inside the component.
    pub cells: Vec<usize>,
    /// Right eigenvector h on `cells`, with max h = 1.
    pub right: Vec<f64>,
    /// Left eigenvector λ on `cells`, scaled so that Σ h·λ = 1.
    pub left: Vec<f64>,
    /// Contraction of the shifted iteration; 1 − (ratio of successive
    /// iterate changes).
    pub gap: f64,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 200_000;
const BRACKET_TOL: f64 = 1e-14;

/// Sparse transfer matrix on full-depth cells: rows[i] lists (j, e^{φ(c_j)})
/// for the cells c_j obtained by prepending one edge to c_i.
struct CellMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl CellMatrix {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .par_iter()
            .with_min_len(256)
            .map(|row| row.iter().map(|&(j, w)| w * v[j]).sum())
            .collect()
    }

    fn transpose(&self) -> CellMatrix {
        let mut rows = vec![Vec::new(); self.rows.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                rows[j].push((i, w));
            }
        }
        CellMatrix { rows }
    }

    /// Power iteration on M + I, which has the same Perron vector and no
    /// other eigenvalue on its spectral circle even for periodic M.
    fn perron(&self) -> Result<(Vec<f64>, (f64, f64), f64, usize)> {
        let n = self.rows.len();
        let mut v = vec![1.0; n];
        let (mut last_change, mut gap) = (f64::NAN, 0.0);
        for it in 1..=MAX_ITERATIONS {
            let mv = self.apply(&v);
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for i in 0..n {
                let q = mv[i] / v[i];
                lo = lo.min(q);
                hi = hi.max(q);
            }
            if hi - lo <= BRACKET_TOL * hi {
                let m = v.iter().cloned().fold(0.0, f64::max);
                v.iter_mut().for_each(|x| *x /= m);
                return Ok((v, (lo, hi), gap, it));
            }
            let mut next: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a + b).collect();
            let norm = next.iter().cloned().fold(0.0, f64::max);
            next.iter_mut().for_each(|x| *x /= norm);
            let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if last_change > 0.0 {
                gap = 1.0 - change / last_change;
            }
            last_change = change;
            v = next;
            if v.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::NonConvergence(
                    "iterate lost positivity; the component's cell graph is not irreducible".into(),
                ));
            }
        }
        Err(Error::NonConvergence(format!(
            "Perron iteration did not settle in {MAX_ITERATIONS} steps (gap estimate {gap})"
        )))
    }
}

fn component_cells(pot: &CylinderPotential, aut: &GeodesicAutomaton, dag: &ComponentDag, comp: usize) -> Vec<usize> {
    pot.cells
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.len() == pot.depth
                && c.iter().all(|&e| {
                    let ed = aut.edge(e);
                    dag.component_of[ed.from] == comp && dag.component_of[ed.to] == comp
                })
        })
        .map(|(i, _)| i)
        .collect()
}

fn cell_matrix(pot: &CylinderPotential, aut: &GeodesicAutomaton, cells: &[usize], allowed: impl Fn(usize) -> bool) -> CellMatrix {
    let local: rustc_hash::FxHashMap<usize, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let rows = cells
        .iter()
        .map(|&ci| {
            let c = &pot.cells[ci];
            let head = aut.edge(c[0]).from;
            let mut row = Vec::new();
            for (e, ed) in aut.edges().iter().enumerate() {
                if ed.to != head || !allowed(e) {
                    continue;
                }
                let mut w = Vec::with_capacity(pot.depth);
                w.push(e);
                w.extend_from_slice(&c[..pot.depth - 1]);
                if let Some(j) = pot.cell_index(&w).and_then(|g| local.get(&g).copied()) {
                    row.push((j, pot.values[pot.cell_index(&w).unwrap()].exp()));
                }
            }
            row
        })
        .collect();
    CellMatrix { rows }
}

/// Perron data of the transfer operator restricted to one component.
pub fn pressure_component(pot: &CylinderPotential, aut: &GeodesicAutomaton, dag: &ComponentDag, comp: usize) -> Result<PerronData> {
    let component = dag
        .components
        .get(comp)
        .ok_or_else(|| Error::Precondition(format!("no component {comp}")))?;
    if component.is_trivial() {
        return Err(Error::Precondition(format!("component {comp} carries no cycle")));
    }
    let cells = component_cells(pot, aut, dag, comp);
    if cells.is_empty() {
        return Err(Error::Precondition(format!("component {comp} has no full-depth cells")));
    }
    let m = cell_matrix(pot, aut, &cells, |_| true);
    let (right, bracket, gap, iterations) = m.perron()?;
    let (mut left, _, _, _) = m.transpose().perron()?;
    let dot: f64 = right.iter().zip(&left).map(|(a, b)| a * b).sum();
    left.iter_mut().for_each(|x| *x /= dot);
    let rho = 0.5 * (bracket.0 + bracket.1);
    Ok(PerronData {
        component: comp,
        pressure: rho.ln(),
        perron_bracket: bracket,
        period: component.period,
        cells,
        right,
        left,
        gap,
        iterations,
    })
}

/// Σ_{x∈S_n} H_r(e,x) = H_r(e,e)·L_φ^n 1_{[E_*]}(∅) for n = 0..=n_max.
///
/// Paths are built from the end by prepending edges; each prefix step
/// multiplies by e^φ of the current suffix cylinder.
pub fn operator_sphere_sums(aut: &GeodesicAutomaton, pot: &CylinderPotential, n_max: usize, h_ee: f64) -> Vec<f64> {
    let k = pot.len();
    // successor cells of each cell under prepending, and the single-edge cells
    let prepend: Vec<Vec<usize>> = pot
        .cells
        .iter()
        .map(|c| {
            let head = aut.edge(c[0]).from;
            aut.edges()
                .iter()
                .enumerate()
                .filter(|(_, ed)| ed.to == head)
                .filter_map(|(e, _)| {
                    let mut w = Vec::with_capacity(c.len() + 1);
                    w.push(e);
                    w.extend_from_slice(&c[..c.len().min(pot.depth - 1)]);
                    pot.cell_index(&w)
                })
                .collect()
        })
        .collect();
    let factor: Vec<f64> = pot.values.iter().map(|v| v.exp()).collect();
    let from_start: Vec<bool> = pot.cells.iter().map(|c| aut.edge(c[0]).from == aut.start()).collect();
    let mut out = vec![h_ee];
    let mut w = vec![0.0; k];
    for (i, c) in pot.cells.iter().enumerate() {
        if c.len() == 1 {
            w[i] = factor[i];
        }
    }
    for n in 1..=n_max {
        if n > 1 {
            let mut next = vec![0.0; k];
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    for &t in &prepend[i] {
                        next[t] += wi * factor[t];
                    }
                }
            }
            w = next;
        }
        let s: f64 = w.iter().zip(&from_start).filter(|(_, s)| **s).map(|(v, _)| v).sum();
        out.push(h_ee * s);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct Semisimplicity {
    pub max_pressure: f64,
    pub maximal: Vec<usize>,
    pub semisimple: bool,
}

/// Maximal components are those within `tol` of the top pressure (ties
/// included); the operator is semisimple when no DAG path joins two of them.
pub fn semisimplicity_check(dag: &ComponentDag, pressures: &[Option<f64>], tol: f64) -> Semisimplicity {
    let max_pressure = pressures.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let maximal: Vec<usize> = pressures
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_some_and(|p| p >= max_pressure - tol))
        .map(|(i, _)| i)
        .collect();
    let semisimple = !maximal
        .iter()
        .any(|&i| maximal.iter().any(|&j| i != j && dag.reaches(i, j)));
    Semisimplicity {
        max_pressure,
        maximal,
        semisimple,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct JordanReport {
    pub pressure: f64,
    /// (n, L^n 1(∅)·e^{−nP}).
    pub values: Vec<(usize, f64)>,
    /// Fitted polynomial degree k − 1.
    pub degree: f64,
    pub fit: FitResult,
}

/// Fit log(L^n 1(∅)) − n·P against log n over n ∈ [n_max/4, n_max].
pub fn jordan_growth_probe(aut: &GeodesicAutomaton, pot: &CylinderPotential, n_max: usize) -> Result<JordanReport> {
    if n_max < 8 {
        return Err(Error::InsufficientData("need n_max ≥ 8".into()));
    }
    let dag = scc_decompose(aut);
    let mut pressure = f64::NEG_INFINITY;
    for (i, c) in dag.components.iter().enumerate() {
        if !c.is_trivial() {
            pressure = pressure.max(pressure_component(pot, aut, &dag, i)?.pressure);
        }
    }
    if !pressure.is_finite() {
        return Err(Error::Precondition("automaton has no cycles".into()));
    }
    let sums = operator_sphere_sums(aut, pot, n_max, 1.0);
    let values: Vec<(usize, f64)> = (n_max / 4..=n_max)
        .filter(|&n| n >= 1)
        .map(|n| (n, (sums[n].ln() - n as f64 * pressure).exp()))
        .collect();
    let pts: Vec<(f64, f64)> = values.iter().map(|&(n, v)| (n as f64, v)).collect();
    let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0, p.0.ln()]).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (c, residual) = lstsq(&rows, &y)?;
    Ok(JordanReport {
        pressure,
        values,
        degree: c[1],
        fit: FitResult {
            exponent: c[1],
            amplitude: c[0].exp(),
            residual,
            grid: format!("n = {}..{}", n_max / 4, n_max),
            points: pts,
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureRow {
    pub r: f64,
    pub component: usize,
    pub pressure: f64,
    pub gap: f64,
    /// P_i/P_max at this r.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureCurve {
    pub rows: Vec<PressureRow>,
    /// (r, max_i P_i(φ_r)).
    pub max_pressure: Vec<(f64, f64)>,
    /// max pressure is nondecreasing along the grid.
    pub monotone: bool,
}

/// Pressures of all cycle-carrying components of φ_r along the grid.
pub fn pressure_curve(aut: &GeodesicAutomaton, oracle: &dyn GreenOracle, r_grid: &[f64], depth: usize) -> Result<PressureCurve> {
    let dag = scc_decompose(aut);
    let mut rows = Vec::new();
    let mut max_pressure = Vec::new();
    for &r in r_grid {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("r = {r} must be positive")));
        }
        let pot = build_phi_r(aut, oracle, r, depth)?;
        let mut here = Vec::new();
        for (i, c) in dag.components.iter().enumerate() {
            if !c.is_trivial() {
                let p = pressure_component(&pot, aut, &dag, i)?;
                here.push((i, p.pressure, p.gap));
            }
        }
        let top = here.iter().map(|h| h.1).fold(f64::NEG_INFINITY, f64::max);
        for (i, p, gap) in here {
            rows.push(PressureRow {
                r,
                component: i,
                pressure: p,
                gap,
                ratio: if top != 0.0 { p / top } else { 1.0 },
            });
        }
        max_pressure.push((r, top));
    }
    let monotone = max_pressure.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12);
    Ok(PressureCurve {
        rows,
        max_pressure,
        monotone,
    })
}

/// Regress log(−P) on log(R − r) over the points with P < 0 and r < R.
pub fn sqrt_law_fit(max_pressure: &[(f64, f64)], big_r: f64) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = max_pressure
        .iter()
        .filter(|&&(r, p)| r < big_r && p < 0.0)
        .map(|&(r, p)| (big_r - r, -p))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData("need at least 3 points with negative pressure".into()));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0, p.0.ln()]).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (c, residual) = lstsq(&rows, &y)?;
    Ok(FitResult {
        exponent: c[1],
        amplitude: c[0].exp(),
        residual,
        grid: format!("{} points", pts.len()),
        points: pts,
    })
}

/// ρ·λ(c) ≤ e^{max φ}·λ(σc) on every cell, where λ(σc) is the mass of the
/// depth-(m−1) cylinder obtained by dropping the first edge.
pub fn eigenmeasure_check(pot: &CylinderPotential, perron: &PerronData) -> PropertyReport {
    let c_bound = (pot.max_value() - perron.pressure).exp();
    let mut mass: rustc_hash::FxHashMap<&[usize], f64> = rustc_hash::FxHashMap::default();
    for (k, &ci) in perron.cells.iter().enumerate() {
        *mass.entry(&pot.cells[ci][..pot.depth - 1]).or_insert(0.0) += perron.left[k];
    }
    let mut rep = PropertyReport {
        checked: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
    };
    for (k, &ci) in perron.cells.iter().enumerate() {
        let tail = mass.get(&pot.cells[ci][1..]).copied().unwrap_or(0.0);
        let margin = c_bound * tail * (1.0 + 1e-12) - perron.left[k];
        rep.checked += 1;
        if margin < 0.0 {
            rep.violations += 1;
        }
        rep.worst_margin = rep.worst_margin.min(margin);
    }
    rep
}
