//! Pairwise cooperative IT adjustment between base stations.
//!
//! Each agent owns its IT view and its current solution. Two agents `i`, `j`
//! exchange four scalars, `(a, b)` from `i` and `(c, d)` from `j`, build
//! `D_ij`, and move `(Γ_ij, Γ_ji)` along
//! `d_ij = sign(ad - bc) (α d - b, a - α c)`, for which
//! `D_ij d_ij = |ad - bc| (α, 1)`: to first order both rates rise, at ratio α.
//! A step is kept only if both guaranteed rates strictly improve; otherwise
//! the step length is halved.

use std::collections::{BTreeMap, BTreeSet};

use crate::cr_solver::{self, CrSolution, ItVector, ItView, SolverOptions};
use crate::model::{self, NetworkInstance};
use crate::pareto::{self, SensitivityMatrix};
use crate::{Error, Result};

/// The only data two agents share per update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairExchange {
    /// `∂C_i/∂Γ_ij`, sent by `i`.
    pub a: f64,
    /// `∂C_i/∂Γ_ji`, sent by `i`.
    pub b: f64,
    /// `∂C_j/∂Γ_ij`, sent by `j`.
    pub c: f64,
    /// `∂C_j/∂Γ_ji`, sent by `j`.
    pub d: f64,
}

impl PairExchange {
    pub fn matrix(&self, i: usize, j: usize) -> SensitivityMatrix {
        SensitivityMatrix { i, j, a: self.a, b: self.b, c: self.c, d: self.d }
    }
}

/// `sign(ad - bc) (α d - b, a - α c)` with `sign(0) = +1`.
pub fn update_direction(m: &SensitivityMatrix, alpha: f64) -> [f64; 2] {
    let s = if m.det() < 0.0 { -1.0 } else { 1.0 };
    [s * (alpha * m.d - m.b), s * (m.a - alpha * m.c)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub default_alpha: f64,
    /// `α_ij` for specific ordered pairs. A pair visited as `(i, j)` without
    /// its own entry uses `1 / α_ji` when that is set.
    pub alpha: BTreeMap<(usize, usize), f64>,
    /// Initial step length in power units; `None` means
    /// `0.1 · min` of the positive MRT bounds.
    pub delta: Option<f64>,
    pub delta_overrides: BTreeMap<(usize, usize), f64>,
    /// Step shrink factor on rejection.
    pub backtrack: f64,
    /// Rejections in a row before a pair visit is declared stalled.
    pub max_halvings: usize,
    pub max_outer_iters: usize,
    /// Pairs with normalized `|det D|` at or below this are left alone.
    pub cond_tol: f64,
    /// Both rates must rise by more than this (bits) to accept a step.
    pub improvement_tol: f64,
    /// Visit `(i, j)` and `(j, i)` separately in each sweep instead of each
    /// unordered pair once.
    pub ordered_pairs: bool,
    pub solver: SolverOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            default_alpha: 1.0,
            alpha: BTreeMap::new(),
            delta: None,
            delta_overrides: BTreeMap::new(),
            backtrack: 0.5,
            max_halvings: 20,
            max_outer_iters: 200,
            cond_tol: 1e-3,
            improvement_tol: 1e-9,
            ordered_pairs: false,
            solver: SolverOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn alpha_for(&self, i: usize, j: usize) -> f64 {
        if let Some(&a) = self.alpha.get(&(i, j)) {
            a
        } else if let Some(&a) = self.alpha.get(&(j, i)) {
            1.0 / a
        } else {
            self.default_alpha
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Usage(msg));
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!("backtracking factor must lie in (0, 1), got {}", self.backtrack));
        }
        if !(self.default_alpha >= 0.0 && self.default_alpha.is_finite()) {
            return bad(format!("alpha must be finite and non-negative, got {}", self.default_alpha));
        }
        for (&(i, j), &a) in &self.alpha {
            if i == j || !(a > 0.0 && a.is_finite()) {
                return bad(format!("alpha for pair ({i}, {j}) must be positive and finite, got {a}"));
            }
        }
        for (&(i, j), &d) in &self.delta_overrides {
            if i == j || !(d > 0.0 && d.is_finite()) {
                return bad(format!("step for pair ({i}, {j}) must be positive and finite, got {d}"));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("step size must be positive and finite, got {d}"));
            }
        }
        if self.cond_tol.is_nan() || self.cond_tol < 0.0 || self.improvement_tol.is_nan() || self.improvement_tol < 0.0
        {
            return bad("tolerances must be non-negative".into());
        }
        Ok(())
    }
}

/// One base station: its IT view and its solution for that view.
#[derive(Debug, Clone)]
pub struct Agent {
    pub cell: usize,
    pub view: ItView,
    pub solution: CrSolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Initial,
    Accepted,
    /// Normalized `|det D|` already within tolerance.
    Skipped,
    /// No step length produced a double improvement.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    /// Outer sweep number, starting at 1; 0 for the initial row.
    pub iteration: usize,
    pub pair: Option<(usize, usize)>,
    pub status: StepStatus,
    pub exchange: Option<PairExchange>,
    /// Step length of the accepted move.
    pub step: Option<f64>,
    pub gamma: ItVector,
    /// Guaranteed rates `C_k` of all agents after this step.
    pub rates: Vec<f64>,
    /// Normalized `|det D_ij|` of every unordered pair after this step.
    pub residuals: BTreeMap<(usize, usize), f64>,
}

impl TrajectoryStep {
    pub fn max_residual(&self) -> f64 {
        self.residuals.values().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    /// A full sweep ended without any accepted step.
    pub converged: bool,
    pub outer_iterations: usize,
    /// Pairs whose last visit stalled.
    pub stalled_pairs: Vec<(usize, usize)>,
    /// Solver failures on trial points (each counted as a rejection).
    pub solver_failures: usize,
}

impl Trajectory {
    pub fn final_rates(&self) -> &[f64] {
        &self.steps.last().expect("trajectory has an initial row").rates
    }

    pub fn final_gamma(&self) -> &ItVector {
        &self.steps.last().expect("trajectory has an initial row").gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartKind {
    ZeroForcing,
    MaxRatio,
}

/// IT levels produced by full-power ZF or MRT beamforming.
pub fn start_point(net: &NetworkInstance, kind: StartKind) -> Result<ItVector> {
    let state = match kind {
        StartKind::ZeroForcing => model::zf_state(net)?,
        StartKind::MaxRatio => model::mrt_state(net)?,
    };
    pareto::extract_it(&state, net)
}

/// Outcome of one pair visit.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub status: StepStatus,
    pub exchange: PairExchange,
    pub step: Option<f64>,
    pub solver_failures: usize,
}

/// Agents plus the shared IT store, advanced one pair at a time.
#[derive(Debug)]
pub struct Simulation<'a> {
    net: &'a NetworkInstance,
    config: RunConfig,
    gamma: ItVector,
    bounds: ItVector,
    agents: Vec<Agent>,
    base_step: BTreeMap<(usize, usize), f64>,
    step: BTreeMap<(usize, usize), f64>,
}

fn unordered(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

impl<'a> Simulation<'a> {
    pub fn new(net: &'a NetworkInstance, init: &ItVector, config: RunConfig) -> Result<Self> {
        config.validate()?;
        if init.cells() != net.cells() {
            return Err(Error::Dimension(format!(
                "initial IT vector covers {} cells, network has {}",
                init.cells(),
                net.cells()
            )));
        }
        let bounds = ItVector::mrt_bounds(net)?;
        let default_step = match config.delta {
            Some(d) => d,
            None => {
                let min = bounds.entries().map(|(_, _, v)| v).filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
                if min.is_finite() {
                    0.1 * min
                } else {
                    1e-3
                }
            }
        };
        let mut base_step = BTreeMap::new();
        for i in 0..net.cells() {
            for j in (0..net.cells()).filter(|&j| j != i) {
                let d = config
                    .delta_overrides
                    .get(&(i, j))
                    .or_else(|| config.delta_overrides.get(&(j, i)))
                    .copied()
                    .unwrap_or(default_step);
                base_step.insert((i, j), d);
            }
        }
        let agents = (0..net.cells())
            .map(|k| {
                let view = init.view(k);
                let solution = cr_solver::solve_cr(k, &view, net, &config.solver)?;
                Ok(Agent { cell: k, view, solution })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { net, config, gamma: init.clone(), bounds, agents, step: base_step.clone(), base_step })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn gamma(&self) -> &ItVector {
        &self.gamma
    }

    pub fn rates(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.solution.value).collect()
    }

    /// Normalized `|det D_ij|` for every unordered pair from the current
    /// solutions.
    pub fn residuals(&self) -> BTreeMap<(usize, usize), f64> {
        let k = self.net.cells();
        let mut out = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                let m = pareto::sensitivity_from_solutions(
                    &self.agents[i].solution,
                    &self.agents[j].solution,
                    &self.gamma,
                    self.net,
                );
                out.insert((i, j), m.normalized_residual());
            }
        }
        out
    }

    /// The four scalars of pair `(i, j)`. Where a zero budget makes a
    /// multiplier infinite, the derivatives are taken at the budget lifted to
    /// `1e-4 Γ̄`, the nearest point where they are finite.
    pub fn exchange(&self, i: usize, j: usize) -> Result<PairExchange> {
        let (si, sj) = (&self.agents[i].solution, &self.agents[j].solution);
        let m = pareto::sensitivity_from_solutions(si, sj, &self.gamma, self.net);
        let m = if m.is_finite() {
            m
        } else {
            let mut lifted = self.gamma.clone();
            for (a, b) in [(i, j), (j, i)] {
                lifted.set(a, b, self.gamma.get(a, b).max(1e-4 * self.bounds.get(a, b)))?;
            }
            pareto::sensitivity_pair(i, j, &lifted, self.net, &self.config.solver)?
        };
        Ok(PairExchange { a: m.a, b: m.b, c: m.c, d: m.d })
    }

    /// Exchange, direction, and backtracked trial steps for pair `(i, j)`.
    pub fn pair_update(&mut self, i: usize, j: usize) -> Result<PairOutcome> {
        self.net.check_cell(i)?;
        self.net.check_cell(j)?;
        if i == j {
            return Err(Error::Usage(format!("pair update needs distinct cells, got {i} twice")));
        }
        let exchange = self.exchange(i, j)?;
        let m = exchange.matrix(i, j);
        let outcome = |status, step, solver_failures| PairOutcome { status, exchange, step, solver_failures };
        if m.normalized_residual() <= self.config.cond_tol {
            return Ok(outcome(StepStatus::Skipped, None, 0));
        }
        let dir = update_direction(&m, self.config.alpha_for(i, j));
        let norm = dir[0].hypot(dir[1]);
        if !(norm > 0.0 && norm.is_finite()) {
            return Ok(outcome(StepStatus::Skipped, None, 0));
        }
        let unit = [dir[0] / norm, dir[1] / norm];

        let (c_i, c_j) = (self.agents[i].solution.value, self.agents[j].solution.value);
        let (g_ij, g_ji) = (self.gamma.get(i, j), self.gamma.get(j, i));
        let mut delta = self.step[&(i, j)];
        let mut failures = 0;
        for _ in 0..=self.config.max_halvings {
            let t_ij = (g_ij + delta * unit[0]).clamp(0.0, self.bounds.get(i, j));
            let t_ji = (g_ji + delta * unit[1]).clamp(0.0, self.bounds.get(j, i));
            if t_ij == g_ij && t_ji == g_ji {
                break;
            }
            let mut trial = self.gamma.clone();
            trial.set(i, j, t_ij)?;
            trial.set(j, i, t_ji)?;
            let (vi, vj) = (trial.view(i), trial.view(j));
            let solved = cr_solver::solve_cr(i, &vi, self.net, &self.config.solver)
                .and_then(|si| Ok((si, cr_solver::solve_cr(j, &vj, self.net, &self.config.solver)?)));
            match solved {
                Ok((si, sj))
                    if si.value > c_i + self.config.improvement_tol && sj.value > c_j + self.config.improvement_tol =>
                {
                    self.gamma = trial;
                    self.agents[i].view = vi;
                    self.agents[i].solution = si;
                    self.agents[j].view = vj;
                    self.agents[j].solution = sj;
                    let base = self.base_step[&(i, j)];
                    self.step.insert((i, j), base.min(delta / self.config.backtrack));
                    self.step.insert((j, i), base.min(delta / self.config.backtrack));
                    return Ok(outcome(StepStatus::Accepted, Some(delta), failures));
                }
                Ok(_) => {}
                Err(_) => failures += 1,
            }
            delta *= self.config.backtrack;
        }
        Ok(outcome(StepStatus::Stalled, None, failures))
    }

    fn snapshot(
        &self,
        iteration: usize,
        pair: Option<(usize, usize)>,
        outcome: Option<&PairOutcome>,
    ) -> TrajectoryStep {
        TrajectoryStep {
            iteration,
            pair,
            status: outcome.map_or(StepStatus::Initial, |o| o.status),
            exchange: outcome.map(|o| o.exchange),
            step: outcome.and_then(|o| o.step),
            gamma: self.gamma.clone(),
            rates: self.rates(),
            residuals: self.residuals(),
        }
    }

    /// Round-robin sweeps until one sweep accepts nothing or the sweep
    /// budget runs out.
    pub fn run(mut self) -> Result<Trajectory> {
        let k = self.net.cells();
        let pairs: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| if self.config.ordered_pairs { i != j } else { i < j })
            .collect();
        let mut steps = vec![self.snapshot(0, None, None)];
        let mut stalled = BTreeSet::new();
        let mut failures = 0;
        let mut converged = pairs.is_empty();
        let mut outer = 0;
        while !converged && outer < self.config.max_outer_iters {
            outer += 1;
            let mut any = false;
            for &(i, j) in &pairs {
                let o = self.pair_update(i, j)?;
                failures += o.solver_failures;
                match o.status {
                    StepStatus::Accepted => {
                        any = true;
                        stalled.remove(&unordered(i, j));
                    }
                    StepStatus::Stalled => {
                        stalled.insert(unordered(i, j));
                    }
                    _ => {
                        stalled.remove(&unordered(i, j));
                    }
                }
                steps.push(self.snapshot(outer, Some((i, j)), Some(&o)));
            }
            converged = !any;
        }
        Ok(Trajectory {
            steps,
            converged,
            outer_iterations: outer,
            stalled_pairs: stalled.into_iter().collect(),
            solver_failures: failures,
        })
    }
}

/// Runs the protocol from `init`.
pub fn run(net: &NetworkInstance, init: &ItVector, config: &RunConfig) -> Result<Trajectory> {
    Simulation::new(net, init, config.clone())?.run()
}

/// How far `point` falls short of a front: `min_f max_k (f_k - point_k)^+`.
/// Zero when some front point is dominated-or-matched by `point`.
pub fn front_deficiency<P: AsRef<[f64]>>(front: &[P], point: &[f64]) -> f64 {
    front
        .iter()
        .map(|f| f.as_ref().iter().zip(point).map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}
