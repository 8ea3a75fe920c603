//! Pareto boundary through IT parametrization: IT extraction, boundary
//! consistency, pairwise sensitivity matrices and the two-user sweep.

use std::collections::BTreeMap;

use crate::cr_solver::{self, CrSolution, ItVector, SolverOptions};
use crate::model::{self, dominates, NetworkInstance, RateTuple, TransmitState};
use crate::{Error, Result};

/// Interference levels caused by `state`: `Γ_kj = h_kj^H S_k h_kj`.
pub fn extract_it(state: &TransmitState, net: &NetworkInstance) -> Result<ItVector> {
    state.check_dimensions(net)?;
    let mut out = ItVector::zeros(net.cells());
    for k in 0..net.cells() {
        for j in (0..net.cells()).filter(|&j| j != k) {
            out.set(k, j, model::interference_level(k, j, state.covariance(k), net)?)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Achievable rates `R_k` of the state.
    pub rates: Vec<f64>,
    /// `C_k` at the state's own interference levels.
    pub guaranteed: Vec<f64>,
    /// `C_k - R_k`; never meaningfully negative since the state is feasible.
    pub gaps: Vec<f64>,
    pub is_consistent: bool,
}

/// Re-solves every cell at the IT levels `state` produces. On the Pareto
/// boundary the guaranteed rates equal the achievable ones.
pub fn boundary_consistency(
    state: &TransmitState,
    net: &NetworkInstance,
    tol: f64,
    opts: &SolverOptions,
) -> Result<ConsistencyReport> {
    let gamma = extract_it(state, net)?;
    let rates = model::rate_tuple(state, net)?.into_vec();
    let guaranteed: Vec<f64> = cr_solver::solve_all(&gamma, net, opts)?.into_iter().map(|s| s.value).collect();
    let gaps: Vec<f64> = guaranteed.iter().zip(&rates).map(|(c, r)| c - r).collect();
    let is_consistent = gaps.iter().all(|g| g.abs() <= tol);
    Ok(ConsistencyReport { rates, guaranteed, gaps, is_consistent })
}

/// Partial derivatives of the guaranteed rates of cells `i` and `j` with
/// respect to their mutual IT levels:
///
/// ```text
/// D = [ ∂C_i/∂Γ_ij  ∂C_i/∂Γ_ji ]  =  [ a  b ]
///     [ ∂C_j/∂Γ_ij  ∂C_j/∂Γ_ji ]     [ c  d ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityMatrix {
    pub i: usize,
    pub j: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SensitivityMatrix {
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// `|ad - bc| / max(|ad|, |bc|, 1e-12)`. Non-finite entries (zero-budget
    /// multipliers) give 1.
    pub fn normalized_residual(&self) -> f64 {
        normalized_residual(self.a, self.b, self.c, self.d)
    }

    /// `D v`.
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite())
    }
}

pub fn normalized_residual(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (ad, bc) = (a * d, b * c);
    if !(ad.is_finite() && bc.is_finite()) {
        return 1.0;
    }
    (ad - bc).abs() / ad.abs().max(bc.abs()).max(1e-12)
}

/// Builds `D_ij` from solutions of cells `i` and `j` at `gamma`.
pub fn sensitivity_from_solutions(
    sol_i: &CrSolution,
    sol_j: &CrSolution,
    gamma: &ItVector,
    net: &NetworkInstance,
) -> SensitivityMatrix {
    let (i, j) = (sol_i.cell, sol_j.cell);
    SensitivityMatrix {
        i,
        j,
        a: cr_solver::rate_derivative_outgoing(i, j, sol_i),
        b: cr_solver::rate_derivative_incoming(i, sol_i, &gamma.view(i), net),
        c: cr_solver::rate_derivative_incoming(j, sol_j, &gamma.view(j), net),
        d: cr_solver::rate_derivative_outgoing(j, i, sol_j),
    }
}

pub fn sensitivity_pair(
    i: usize,
    j: usize,
    gamma: &ItVector,
    net: &NetworkInstance,
    opts: &SolverOptions,
) -> Result<SensitivityMatrix> {
    net.check_cell(i)?;
    net.check_cell(j)?;
    if i == j {
        return Err(Error::Usage(format!("sensitivity needs distinct cells, got {i} twice")));
    }
    let sol_i = cr_solver::solve_cr(i, &gamma.view(i), net, opts)?;
    let sol_j = cr_solver::solve_cr(j, &gamma.view(j), net, opts)?;
    Ok(sensitivity_from_solutions(&sol_i, &sol_j, gamma, net))
}

/// Normalized `|det D_ij|` for every unordered pair `i < j`.
pub fn necessary_condition_residuals(
    gamma: &ItVector,
    net: &NetworkInstance,
    opts: &SolverOptions,
) -> Result<BTreeMap<(usize, usize), f64>> {
    let sols = cr_solver::solve_all(gamma, net, opts)?;
    let mut out = BTreeMap::new();
    for i in 0..net.cells() {
        for j in i + 1..net.cells() {
            out.insert((i, j), sensitivity_from_solutions(&sols[i], &sols[j], gamma, net).normalized_residual());
        }
    }
    Ok(out)
}

/// Indices of the non-dominated points, ascending. Among identical points
/// only the first is kept.
pub fn pareto_front_indices<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<usize>> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let dim = first.as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::Dimension(format!("rate tuples of length {dim} and {}", p.as_ref().len())));
    }
    if points.iter().flat_map(|p| p.as_ref()).any(|v| v.is_nan()) {
        return Err(Error::Usage("rate tuples must not contain NaN".into()));
    }
    if dim == 2 {
        return Ok(front_2d(points));
    }
    let keep = |i: usize| {
        let p = points[i].as_ref();
        points.iter().enumerate().all(|(j, q)| {
            let q = q.as_ref();
            !(dominates(q, p) || (j < i && q == p))
        })
    };
    Ok((0..points.len()).filter(|&i| keep(i)).collect())
}

fn front_2d<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&x, &y| {
        let (p, q) = (points[x].as_ref(), points[y].as_ref());
        q[0].total_cmp(&p[0]).then(q[1].total_cmp(&p[1])).then(x.cmp(&y))
    });
    let mut best = f64::NEG_INFINITY;
    let mut kept = Vec::new();
    for i in order {
        let r2 = points[i].as_ref()[1];
        if r2 > best {
            best = r2;
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// The non-dominated subset of `points`, in input order.
pub fn pareto_filter(points: &[RateTuple]) -> Result<Vec<RateTuple>> {
    Ok(pareto_front_indices(points)?.into_iter().map(|i| points[i].clone()).collect())
}

/// Both cells solved at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepValues {
    /// `(C_1, C_2)`.
    pub guaranteed: [f64; 2],
    /// Rates when both cells use the solved beamformers.
    pub actual: [f64; 2],
    /// Normalized `|det D_12|`.
    pub residual: f64,
    pub solutions: [CrSolution; 2],
}

#[derive(Debug)]
pub struct SweepPoint {
    /// `(index along Γ_12, index along Γ_21)`.
    pub grid_index: (usize, usize),
    pub gamma_12: f64,
    pub gamma_21: f64,
    pub outcome: Result<SweepValues>,
}

#[derive(Debug)]
pub struct BoundarySweep {
    pub n_grid: usize,
    /// `(Γ̄_12, Γ̄_21)`.
    pub bounds: [f64; 2],
    /// Row-major: `Γ_12` index outer, `Γ_21` index inner.
    pub points: Vec<SweepPoint>,
    /// Indices into `points` of the non-dominated guaranteed-rate pairs.
    pub front: Vec<usize>,
}

impl BoundarySweep {
    pub fn point(&self, i12: usize, i21: usize) -> &SweepPoint {
        &self.points[i12 * self.n_grid + i21]
    }

    pub fn front_points(&self) -> impl Iterator<Item = (&SweepPoint, &SweepValues)> {
        self.front.iter().map(|&i| {
            let p = &self.points[i];
            (p, p.outcome.as_ref().expect("front points are solved"))
        })
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }
}

/// `i / (n - 1) · bound` for `i = 0..n`, hitting both ends exactly.
pub fn grid_levels(bound: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![bound],
        _ => (0..n).map(|i| if i + 1 == n { bound } else { bound * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Solves one two-user grid point.
pub fn sweep_point(gamma_12: f64, gamma_21: f64, net: &NetworkInstance, opts: &SolverOptions) -> Result<SweepValues> {
    let mut gamma = ItVector::zeros(2);
    gamma.set(0, 1, gamma_12)?;
    gamma.set(1, 0, gamma_21)?;
    let s1 = cr_solver::solve_cr(0, &gamma.view(0), net, opts)?;
    let s2 = cr_solver::solve_cr(1, &gamma.view(1), net, opts)?;
    let residual = sensitivity_from_solutions(&s1, &s2, &gamma, net).normalized_residual();
    let state = TransmitState::from_beamformers(vec![s1.beamformer.clone(), s2.beamformer.clone()]);
    let actual = model::rate_tuple(&state, net)?;
    Ok(SweepValues { guaranteed: [s1.value, s2.value], actual: [actual[0], actual[1]], residual, solutions: [s1, s2] })
}

/// Uniform `n_grid × n_grid` sweep of `[0, Γ̄_12] × [0, Γ̄_21]` for a
/// two-user network. Per-point solver failures are recorded, not fatal.
pub fn sweep_boundary_2user(net: &NetworkInstance, n_grid: usize, opts: &SolverOptions) -> Result<BoundarySweep> {
    if net.cells() != 2 {
        return Err(Error::Usage(format!("the boundary sweep needs 2 cells, got {}", net.cells())));
    }
    if n_grid == 0 {
        return Err(Error::Usage("the boundary sweep needs at least one grid level".into()));
    }
    let bounds = [model::mrt_it_bound(0, 1, net)?, model::mrt_it_bound(1, 0, net)?];
    let l12 = grid_levels(bounds[0], n_grid);
    let l21 = grid_levels(bounds[1], n_grid);
    let mut points = Vec::with_capacity(n_grid * n_grid);
    for (a, &g12) in l12.iter().enumerate() {
        for (b, &g21) in l21.iter().enumerate() {
            points.push(SweepPoint {
                grid_index: (a, b),
                gamma_12: g12,
                gamma_21: g21,
                outcome: sweep_point(g12, g21, net, opts),
            });
        }
    }
    let solved: Vec<usize> = (0..points.len()).filter(|&i| points[i].outcome.is_ok()).collect();
    let rates: Vec<[f64; 2]> =
        solved.iter().map(|&i| points[i].outcome.as_ref().map(|v| v.guaranteed).unwrap_or_default()).collect();
    let front = pareto_front_indices(&rates)?.into_iter().map(|i| solved[i]).collect();
    Ok(BoundarySweep { n_grid, bounds, points, front })
}

/// Largest normalized IT slack `|h^H S h - Γ| / max(Γ, 1)` over the cross
/// pairs of a solved sweep point.
pub fn tightness_residual(point: &SweepPoint) -> Option<f64> {
    let v = point.outcome.as_ref().ok()?;
    let r12 = (v.solutions[0].interference[1] - point.gamma_12).abs() / point.gamma_12.max(1.0);
    let r21 = (v.solutions[1].interference[0] - point.gamma_21).abs() / point.gamma_21.max(1.0);
    Some(r12.max(r21))
}
