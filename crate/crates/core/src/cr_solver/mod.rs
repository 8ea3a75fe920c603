//! Per-cell rate maximization under interference-temperature constraints.
//!
//! For cell `k` with IT view `Γ_k` the problem is
//!
//! ```text
//! max_S  log2(1 + h_kk^H S h_kk / (Σ_{j≠k} Γ_jk + σ_k²))
//! s.t.   h_kj^H S h_kj <= Γ_kj   for all j != k
//!        tr(S) <= P_k,  S ⪰ 0
//! ```
//!
//! Its Lagrange dual is searched with the ellipsoid method. For fixed duals
//! `λ_k` the inner maximization has a closed form: with
//! `B = Σ_j λ_kj h_kj h_kj^H + λ_kk I` the maximizer is rank one,
//! `w = B^{-1} h_kk sqrt(p)` with water-filling scale
//! `p = (1/ln2 - N/q)^+ / q`, `q = h_kk^H B^{-1} h_kk`.
//!
//! Constraints with a zero budget (`Γ_kj = 0`) have no strictly feasible
//! point and their multiplier is not attained. They are enforced exactly by
//! restricting the search to the orthogonal complement of those channels; the
//! reported multiplier is `+∞` when the budget binds to first order and `0`
//! otherwise.

mod ellipsoid;

use std::f64::consts::LN_2;

use crate::linalg::{self, gain, quad_form};
use crate::model::{mrt_it_bound, NetworkInstance};
use crate::{CMatrix, CVector, Error, Result, C64};

pub use ellipsoid::SolverOptions;

/// Budgets below this fraction of the largest possible interference
/// `P_k ||h_kj||^2` are treated as exactly zero.
pub const ZERO_BUDGET_REL: f64 = 1e-12;

/// IT levels `Γ_kj` for every ordered pair `k != j`, in linear power units.
#[derive(Debug, Clone, PartialEq)]
pub struct ItVector {
    cells: usize,
    values: Vec<f64>,
}

impl ItVector {
    pub fn zeros(cells: usize) -> Self {
        Self { cells, values: vec![0.0; cells * cells] }
    }

    /// Builds the vector from `f(k, j)` for every ordered pair `k != j`.
    pub fn from_fn(cells: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut out = Self::zeros(cells);
        for k in 0..cells {
            for j in 0..cells {
                if k != j {
                    out.set(k, j, f(k, j))?;
                }
            }
        }
        Ok(out)
    }

    /// The MRT bounds `Γ̄_kj` for every pair.
    pub fn mrt_bounds(net: &NetworkInstance) -> Result<Self> {
        let mut out = Self::zeros(net.cells());
        for k in 0..net.cells() {
            for j in 0..net.cells() {
                if k != j {
                    out.set(k, j, mrt_it_bound(k, j, net)?)?;
                }
            }
        }
        Ok(out)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// `Γ_kj`.
    pub fn get(&self, k: usize, j: usize) -> f64 {
        debug_assert!(k != j, "Γ is only defined for k != j");
        self.values[k * self.cells + j]
    }

    pub fn set(&mut self, k: usize, j: usize, value: f64) -> Result<()> {
        if k >= self.cells || j >= self.cells || k == j {
            return Err(Error::Usage(format!("invalid IT index ({k}, {j}) for {} cells", self.cells)));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Usage(format!("IT level ({k}, {j}) must be finite and non-negative, got {value}")));
        }
        self.values[k * self.cells + j] = value;
        Ok(())
    }

    /// Ordered pairs `(k, j, Γ_kj)` in lexicographic order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cells)
            .flat_map(move |k| (0..self.cells).map(move |j| (k, j)))
            .filter(|(k, j)| k != j)
            .map(move |(k, j)| (k, j, self.get(k, j)))
    }

    /// Cell `k`'s view: its outgoing budgets and the incoming ones it treats
    /// as interference.
    pub fn view(&self, k: usize) -> ItView {
        let outgoing = (0..self.cells).map(|j| if j == k { 0.0 } else { self.get(k, j) }).collect();
        let incoming = (0..self.cells).map(|j| if j == k { 0.0 } else { self.get(j, k) }).collect();
        ItView { cell: k, outgoing, incoming }
    }
}

/// The `2(K-1)` IT levels that enter cell `k`'s problem. Both vectors have
/// length `K`; the entry at index `k` is unused and held at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ItView {
    cell: usize,
    outgoing: Vec<f64>,
    incoming: Vec<f64>,
}

impl ItView {
    pub fn new(cell: usize, mut outgoing: Vec<f64>, mut incoming: Vec<f64>) -> Result<Self> {
        if outgoing.len() != incoming.len() || cell >= outgoing.len() {
            return Err(Error::Dimension(format!(
                "IT view for cell {cell} with {} outgoing and {} incoming entries",
                outgoing.len(),
                incoming.len()
            )));
        }
        outgoing[cell] = 0.0;
        incoming[cell] = 0.0;
        if let Some(v) = outgoing.iter().chain(&incoming).find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Usage(format!("IT levels must be finite and non-negative, got {v}")));
        }
        Ok(Self { cell, outgoing, incoming })
    }

    pub fn cell(&self) -> usize {
        self.cell
    }

    pub fn cells(&self) -> usize {
        self.outgoing.len()
    }

    /// `Γ_kj`.
    pub fn outgoing(&self, j: usize) -> f64 {
        self.outgoing[j]
    }

    /// `Γ_jk`.
    pub fn incoming(&self, j: usize) -> f64 {
        self.incoming[j]
    }

    pub fn incoming_sum(&self) -> f64 {
        self.incoming.iter().sum()
    }

    pub fn set_outgoing(&mut self, j: usize, value: f64) -> Result<()> {
        self.check_entry(j, value)?;
        self.outgoing[j] = value;
        Ok(())
    }

    pub fn set_incoming(&mut self, j: usize, value: f64) -> Result<()> {
        self.check_entry(j, value)?;
        self.incoming[j] = value;
        Ok(())
    }

    fn check_entry(&self, j: usize, value: f64) -> Result<()> {
        if j >= self.cells() || j == self.cell {
            return Err(Error::Usage(format!("invalid peer {j} for cell {}", self.cell)));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Usage(format!("IT level must be finite and non-negative, got {value}")));
        }
        Ok(())
    }

    fn check_against(&self, net: &NetworkInstance) -> Result<()> {
        net.check_cell(self.cell)?;
        if self.cells() != net.cells() {
            return Err(Error::Dimension(format!(
                "IT view covers {} cells, network has {}",
                self.cells(),
                net.cells()
            )));
        }
        Ok(())
    }
}

/// Multipliers of cell `k`'s IT constraints (`cross[j]`, unused at `j = k`)
/// and of its power constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariables {
    cross: Vec<f64>,
    power: f64,
}

impl DualVariables {
    /// Multipliers may be `+∞` (unattained dual of a zero budget) but never
    /// negative or NaN.
    pub fn new(cell: usize, mut cross: Vec<f64>, power: f64) -> Result<Self> {
        if cell >= cross.len() {
            return Err(Error::Dimension(format!("cell {cell} outside {} dual entries", cross.len())));
        }
        cross[cell] = 0.0;
        if let Some(v) = cross.iter().chain(std::iter::once(&power)).find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Usage(format!("dual variables must be non-negative, got {v}")));
        }
        Ok(Self { cross, power })
    }

    /// `λ_kj`.
    pub fn cross(&self, j: usize) -> f64 {
        self.cross[j]
    }

    /// `λ_kk`.
    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn is_finite(&self) -> bool {
        self.power.is_finite() && self.cross.iter().all(|v| v.is_finite())
    }

    /// `B_k(λ) = Σ_j λ_kj h_kj h_kj^H + λ_kk I`.
    fn b_matrix(&self, k: usize, net: &NetworkInstance) -> CMatrix {
        let m = net.antennas(k);
        let mut b = CMatrix::identity(m, m) * C64::new(self.power, 0.0);
        for j in (0..net.cells()).filter(|&j| j != k) {
            if self.cross[j] != 0.0 {
                b += linalg::outer(net.channel(k, j)) * C64::new(self.cross[j], 0.0);
            }
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Best dual bound minus the returned primal value, in bits.
    pub duality_gap: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// Largest relative constraint violation of the returned beamformer.
    pub max_constraint_violation: f64,
    /// Largest complementary-slackness product `λ · |slack|`, in bits.
    pub max_slackness: f64,
    /// Two active IT constraints with nearly parallel channels: the dual
    /// optimum, and with it the IT derivatives, may not be unique.
    pub near_degenerate: bool,
    /// Peers whose budget is zero and was enforced by null-space restriction.
    pub zero_budget: Vec<usize>,
    /// Peers whose budget can never bind.
    pub vacuous: Vec<usize>,
}

/// Optimal rank-one solution of cell `k`'s problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CrSolution {
    pub cell: usize,
    pub beamformer: CVector,
    /// Transmit power `tr(S) = ||w||^2`.
    pub power: f64,
    /// `C_k(Γ_k)` in bits.
    pub value: f64,
    pub duals: DualVariables,
    /// Received signal power `h_kk^H S h_kk`.
    pub signal: f64,
    /// `interference[j] = h_kj^H S h_kj` (zero at `j = k`).
    pub interference: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl CrSolution {
    pub fn covariance(&self) -> CMatrix {
        linalg::outer(&self.beamformer)
    }
}

/// Closed-form maximizer of the Lagrangian for fixed duals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedInner {
    /// `S̄ = B^{1/2} S B^{1/2} = θ u u^H`.
    pub transformed_covariance: CMatrix,
    /// `u = B^{-1/2} h_kk / ||B^{-1/2} h_kk||`.
    pub direction: CVector,
    /// Water-filling level `θ`.
    pub water_level: f64,
    /// `||B^{-1/2} h_kk||^2`.
    pub effective_gain: f64,
    /// Lagrangian value without the constant terms.
    pub inner_value: f64,
    /// Dual function `g(λ)`.
    pub dual_value: f64,
    /// Recovered primal `S* = B^{-1/2} S̄ B^{-1/2}`.
    pub covariance: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InnerSolution {
    Bounded(BoundedInner),
    /// `B` is singular along a direction the own channel sees, so the
    /// Lagrangian grows without bound along `certificate`
    /// (`B v = 0`, `h_kk^H v != 0`).
    Unbounded {
        certificate: CVector,
    },
}

fn disturbance(gamma: &ItView, net: &NetworkInstance) -> f64 {
    gamma.incoming_sum() + net.noise(gamma.cell())
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Maximizes the Lagrangian of cell `k`'s problem over `S ⪰ 0` for fixed
/// duals. Singular `B` with a null space invisible to `h_kk` is handled with
/// the pseudo-inverse on the range of `B`.
pub fn inner_dual_solution(
    k: usize,
    duals: &DualVariables,
    gamma: &ItView,
    net: &NetworkInstance,
) -> Result<InnerSolution> {
    check_problem(k, gamma, net)?;
    if !duals.is_finite() {
        return Err(Error::Usage("inner solution needs finite dual variables".into()));
    }
    let h = net.channel(k, k);
    let b = duals.b_matrix(k, net);
    let (vals, vecs) = linalg::hermitian_eigen(&b);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let rank_tol = 1e-12 * top;
    let m = h.len();

    let mut null = CVector::zeros(m);
    let mut a = CMatrix::zeros(m, m);
    for (i, &v) in vals.iter().enumerate() {
        let col = vecs.column(i).into_owned();
        if v <= rank_tol {
            null += &col * col.dotc(h);
        } else {
            a += linalg::outer(&col) * C64::new(v.sqrt().recip(), 0.0);
        }
    }
    if null.norm() > 1e-12 * h.norm() {
        let n = null.norm();
        return Ok(InnerSolution::Unbounded { certificate: null / C64::new(n, 0.0) });
    }

    let n = disturbance(gamma, net);
    let ah = &a * h;
    let q = ah.norm_squared();
    let theta = if q > 0.0 { (1.0 / LN_2 - n / q).max(0.0) } else { 0.0 };
    let direction = if q > 0.0 { &ah / C64::new(q.sqrt(), 0.0) } else { CVector::zeros(m) };
    let transformed = linalg::outer(&direction) * C64::new(theta, 0.0);
    let covariance = &a * &transformed * &a;
    let inner_value = log2_1p(theta * q / n) - theta;
    let constants: f64 = (0..net.cells()).filter(|&j| j != k).map(|j| duals.cross(j) * gamma.outgoing(j)).sum::<f64>()
        + duals.power() * net.power(k);
    Ok(InnerSolution::Bounded(BoundedInner {
        transformed_covariance: transformed,
        direction,
        water_level: theta,
        effective_gain: q,
        inner_value,
        dual_value: inner_value + constants,
        covariance,
    }))
}

/// Subgradient of the dual function at `duals`: `Γ_kj - h_kj^H S* h_kj` for
/// each peer `j` and `P_k - tr(S*)` at index `k`.
pub fn dual_subgradient(
    k: usize,
    _duals: &DualVariables,
    inner: &InnerSolution,
    gamma: &ItView,
    net: &NetworkInstance,
) -> Result<Vec<f64>> {
    check_problem(k, gamma, net)?;
    let InnerSolution::Bounded(inner) = inner else {
        return Err(Error::DegenerateDual { cell: k });
    };
    Ok((0..net.cells())
        .map(|j| {
            if j == k {
                net.power(k) - linalg::trace_re(&inner.covariance)
            } else {
                gamma.outgoing(j) - quad_form(net.channel(k, j), &inner.covariance)
            }
        })
        .collect())
}

/// The closed-form beamformer for given duals: `w = B^{-1} h_kk sqrt(p)` with
/// `p = (1/ln2 - N/||A h_kk||^2)^+ / ||A h_kk||^2`, `A = B^{-1/2}`.
/// Returns `(w, p)`.
pub fn beamformer_from_duals(
    k: usize,
    duals: &DualVariables,
    gamma: &ItView,
    net: &NetworkInstance,
) -> Result<(CVector, f64)> {
    check_problem(k, gamma, net)?;
    if !duals.is_finite() {
        return Err(Error::DegenerateDual { cell: k });
    }
    let h = net.channel(k, k);
    let chol = duals.b_matrix(k, net).cholesky().ok_or(Error::DegenerateDual { cell: k })?;
    let v = chol.solve(h);
    let q = h.dotc(&v).re;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::DegenerateDual { cell: k });
    }
    let p = (1.0 / LN_2 - disturbance(gamma, net) / q).max(0.0) / q;
    Ok((v * C64::new(p.sqrt(), 0.0), p))
}

/// `∂C_k/∂Γ_jk` for any incoming peer `j`; depends only on the incoming sum.
pub fn rate_derivative_incoming(k: usize, solution: &CrSolution, gamma: &ItView, net: &NetworkInstance) -> f64 {
    let n = gamma.incoming_sum() + net.noise(k);
    let s = solution.signal;
    -s / (LN_2 * n * (n + s))
}

/// `∂C_k/∂Γ_kj`, the IT multiplier `λ_kj`.
pub fn rate_derivative_outgoing(_k: usize, j: usize, solution: &CrSolution) -> f64 {
    solution.duals.cross(j)
}

fn check_problem(k: usize, gamma: &ItView, net: &NetworkInstance) -> Result<()> {
    gamma.check_against(net)?;
    if gamma.cell() != k {
        return Err(Error::Usage(format!("IT view belongs to cell {}, not {k}", gamma.cell())));
    }
    Ok(())
}

/// A live IT constraint in the reduced coordinates, with its channel
/// normalized to unit length.
#[derive(Debug, Clone)]
struct Live {
    peer: usize,
    dir: CVector,
    norm2: f64,
    /// `Γ_kj / ||h̃_kj||^2`.
    budget: f64,
}

/// Cell `k`'s problem restricted to the complement of its zero-budget
/// channels, with vacuous constraints dropped.
#[derive(Debug, Clone)]
struct Reduced {
    basis: Vec<CVector>,
    own: CVector,
    live: Vec<Live>,
    zero_budget: Vec<usize>,
    vacuous: Vec<usize>,
    power: f64,
    disturbance: f64,
}

impl Reduced {
    fn build(k: usize, gamma: &ItView, net: &NetworkInstance) -> Self {
        let m = net.antennas(k);
        let p = net.power(k);
        let peers: Vec<usize> = (0..net.cells()).filter(|&j| j != k).collect();

        let mut zero_budget = Vec::new();
        let mut zero_span = Vec::new();
        for &j in &peers {
            let h = net.channel(k, j);
            let cap = p * h.norm_squared();
            if cap > 0.0 && gamma.outgoing(j) <= ZERO_BUDGET_REL * cap {
                zero_budget.push(j);
                linalg::extend_orthonormal(&mut zero_span, &[h], 1e-10);
            }
        }
        let basis = linalg::complement_basis(&zero_span, m);
        let reduce = |x: &CVector| CVector::from_iterator(basis.len(), basis.iter().map(|q| q.dotc(x)));

        let mut live = Vec::new();
        let mut vacuous = Vec::new();
        for &j in peers.iter().filter(|j| !zero_budget.contains(j)) {
            let h = net.channel(k, j);
            let hr = reduce(h);
            let n2 = hr.norm_squared();
            if n2 <= 1e-24 * h.norm_squared().max(f64::MIN_POSITIVE) || gamma.outgoing(j) >= p * n2 {
                vacuous.push(j);
            } else {
                live.push(Live {
                    peer: j,
                    dir: hr / C64::new(n2.sqrt(), 0.0),
                    norm2: n2,
                    budget: gamma.outgoing(j) / n2,
                });
            }
        }
        let own = reduce(net.channel(k, k));
        // Full-power MRT solves the power-only relaxation; if it meets every
        // budget, no IT constraint can bind.
        let own2 = own.norm_squared();
        if own2 > 0.0 && live.iter().all(|l| p * l.dir.dotc(&own).norm_sqr() / own2 <= l.budget) {
            vacuous.extend(live.drain(..).map(|l| l.peer));
            vacuous.sort_unstable();
        }
        Self { own, basis, live, zero_budget, vacuous, power: p, disturbance: disturbance(gamma, net) }
    }

    fn lift(&self, w: &CVector, m: usize) -> CVector {
        let mut out = CVector::zeros(m);
        for (q, c) in self.basis.iter().zip(w.iter()) {
            out += q * *c;
        }
        out
    }
}

/// Solves cell `k`'s IT-constrained rate maximization.
///
/// Returns the feasible rank-one optimum together with the converged duals.
/// Fails with [`Error::NonConvergence`] (carrying the best iterate) when the
/// duality gap does not close within the iteration budget.
pub fn solve_cr(k: usize, gamma: &ItView, net: &NetworkInstance, opts: &SolverOptions) -> Result<CrSolution> {
    check_problem(k, gamma, net)?;
    if opts.gap_tol.is_nan() || opts.gap_tol < 0.0 {
        return Err(Error::Usage(format!("gap tolerance must be non-negative, got {}", opts.gap_tol)));
    }
    let m = net.antennas(k);
    let red = Reduced::build(k, gamma, net);
    let h_norm2 = net.channel(k, k).norm_squared();

    let own_norm2 = red.own.norm_squared();
    let degenerate = red.basis.is_empty() || own_norm2 <= 1e-24 * h_norm2 || h_norm2 == 0.0;

    let search = if degenerate { None } else { Some(ellipsoid::dual_search(&red, net.noise(k), h_norm2, opts)) };

    let (w, power_dual, live_duals, best_dual, iterations, restarts, converged) = match &search {
        None => (CVector::zeros(m), 0.0, vec![0.0; red.live.len()], 0.0, 0, 0, true),
        Some(s) => {
            let w_red = &s.direction * C64::new(s.scale.sqrt(), 0.0);
            let live_duals = red.live.iter().zip(&s.point[1..]).map(|(l, mu)| mu / l.norm2).collect();
            (red.lift(&w_red, m), s.point[0], live_duals, s.dual_value, s.iterations, s.restarts, s.converged)
        }
    };

    let h = net.channel(k, k);
    let signal = gain(h, &w);
    let n = red.disturbance;
    let value = log2_1p(signal / n);
    let interference: Vec<f64> =
        (0..net.cells()).map(|j| if j == k { 0.0 } else { gain(net.channel(k, j), &w) }).collect();
    let power = w.norm_squared();

    let mut cross = vec![0.0; net.cells()];
    for (l, lam) in red.live.iter().zip(&live_duals) {
        cross[l.peer] = *lam;
    }
    let zero_duals = zero_budget_duals(k, &red, &w, &cross, power_dual, signal, net);
    for (j, lam) in red.zero_budget.iter().zip(zero_duals) {
        cross[*j] = lam;
    }
    let duals = DualVariables::new(k, cross, power_dual)?;

    let mut violation = ((power - net.power(k)) / net.power(k)).max(0.0);
    let mut slackness = (duals.power() * (net.power(k) - power)).abs();
    for j in (0..net.cells()).filter(|&j| j != k) {
        let cap = net.power(k) * net.channel(k, j).norm_squared();
        let scale = gamma.outgoing(j).max(ZERO_BUDGET_REL * cap).max(f64::MIN_POSITIVE);
        violation = violation.max((interference[j] - gamma.outgoing(j)) / scale);
        let lam = duals.cross(j);
        if lam.is_finite() && lam > 0.0 {
            slackness = slackness.max((lam * (gamma.outgoing(j) - interference[j])).abs());
        }
    }

    let near_degenerate = red.live.iter().enumerate().any(|(a, la)| {
        red.live[a + 1..]
            .iter()
            .any(|lb| duals.cross(la.peer) > 0.0 && duals.cross(lb.peer) > 0.0 && la.dir.dotc(&lb.dir).norm() > 0.999)
    });

    let solution = CrSolution {
        cell: k,
        beamformer: w,
        power,
        value,
        duals,
        signal,
        interference,
        diagnostics: Diagnostics {
            duality_gap: if degenerate { 0.0 } else { best_dual - value },
            iterations,
            restarts,
            max_constraint_violation: violation.max(0.0),
            max_slackness: slackness,
            near_degenerate,
            zero_budget: red.zero_budget.clone(),
            vacuous: red.vacuous.clone(),
        },
    };
    if !converged {
        return Err(Error::NonConvergence { best: Box::new(solution) });
    }
    Ok(solution)
}

/// Solves every cell's problem for the IT vector `gamma`.
pub fn solve_all(gamma: &ItVector, net: &NetworkInstance, opts: &SolverOptions) -> Result<Vec<CrSolution>> {
    if gamma.cells() != net.cells() {
        return Err(Error::Dimension(format!("IT vector covers {} cells, network has {}", gamma.cells(), net.cells())));
    }
    (0..net.cells()).map(|k| solve_cr(k, &gamma.view(k), net, opts)).collect()
}

/// Multipliers of zero-budget constraints.
///
/// With `w != 0`, the full-space stationarity residual
/// `r = h (h^H w) / (ln2 (N + s)) - B w` must be absorbed by the zero-budget
/// channels; since those see no signal from `w`, a nonzero component means the
/// multiplier diverges. With `w = 0` (own channel inside the zero-budget span)
/// the derivative is finite: leaking `Γ` along the best direction allowed by
/// the other zero budgets yields signal `Γ ||P h||^2 / ||P h_z||^2`.
fn zero_budget_duals(
    k: usize,
    red: &Reduced,
    w: &CVector,
    cross: &[f64],
    power_dual: f64,
    signal: f64,
    net: &NetworkInstance,
) -> Vec<f64> {
    if red.zero_budget.is_empty() {
        return Vec::new();
    }
    let h = net.channel(k, k);
    let n = red.disturbance;
    if w.norm_squared() == 0.0 {
        return red
            .zero_budget
            .iter()
            .map(|&z| {
                let mut others = Vec::new();
                for &o in red.zero_budget.iter().filter(|&&o| o != z) {
                    linalg::extend_orthonormal(&mut others, &[net.channel(k, o)], 1e-10);
                }
                let hz = linalg::project_out(net.channel(k, z), &others);
                let hp = linalg::project_out(h, &others);
                if hz.norm_squared() <= 1e-24 * net.channel(k, z).norm_squared() {
                    0.0
                } else {
                    hp.norm_squared() / (hz.norm_squared() * n * LN_2)
                }
            })
            .collect();
    }

    let c = 1.0 / (LN_2 * (n + signal));
    let mut bw = w * C64::new(power_dual, 0.0);
    for (j, &lam) in cross.iter().enumerate() {
        if j != k && lam > 0.0 && lam.is_finite() {
            let hj = net.channel(k, j);
            bw += hj * (hj.dotc(w) * lam);
        }
    }
    let driving = h * (h.dotc(w) * c);
    let r = &driving - bw;
    let cols: Vec<CVector> = red.zero_budget.iter().map(|&z| net.channel(k, z).clone()).collect();
    let hz = linalg::columns(&cols, h.len());
    let coeffs = match hz.clone().svd(true, true).solve(&r, 1e-12) {
        Ok(c) => c,
        Err(_) => return vec![f64::INFINITY; red.zero_budget.len()],
    };
    let scale = driving.norm().max(f64::MIN_POSITIVE);
    red.zero_budget
        .iter()
        .enumerate()
        .map(|(i, &z)| if coeffs[i].norm() * net.channel(k, z).norm() > 1e-5 * scale { f64::INFINITY } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests;
