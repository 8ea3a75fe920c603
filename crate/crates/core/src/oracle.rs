//! Brute-force ground truth for small instances.
//!
//! Nothing here is used by the solver, the sweep or the protocol; tests and
//! the `verify` command compare those against these grids.

use std::f64::consts::{FRAC_PI_2, LN_2, TAU};

use crate::cr_solver::ItView;
use crate::model::{self, NetworkInstance, RateTuple, TransmitState};
use crate::pareto;
use crate::random::GaussianStream;
use crate::{CVector, Error, Result, C64};

/// Unit vector in `C^m` from `m - 1` polar angles `θ ∈ [0, π/2]` and
/// `m - 1` phases `φ ∈ [0, 2π)`:
/// `(cos θ1, e^{iφ1} sin θ1 cos θ2, ..., e^{iφ_{m-1}} sin θ1 ··· sin θ_{m-1})`.
/// Covers every direction up to a global phase.
pub fn sphere_direction(thetas: &[f64], phis: &[f64]) -> CVector {
    let m = thetas.len() + 1;
    let mut out = CVector::zeros(m);
    let mut radius = 1.0;
    for i in 0..m {
        let (mag, phase) = if i + 1 == m {
            (radius, if i == 0 { 0.0 } else { phis[i - 1] })
        } else {
            let t = thetas[i];
            let mag = radius * t.cos();
            radius *= t.sin();
            (mag, if i == 0 { 0.0 } else { phis[i - 1] })
        };
        out[i] = C64::from_polar(mag, phase);
    }
    out
}

/// Search effort for [`oracle_cr_max`].
#[derive(Debug, Clone, PartialEq)]
pub struct CrGrid {
    /// Levels per angle on the coarse grid.
    pub coarse: usize,
    /// Best coarse points refined locally.
    pub keep: usize,
    /// Zoom levels; each shrinks the local window by `zoom`.
    pub levels: usize,
    pub zoom: f64,
    /// Levels per angle inside each local window.
    pub local: usize,
}

impl CrGrid {
    /// Coarse grid 721 per angle for `M = 2` (quarter-degree), 61 for `M = 3`.
    pub fn for_antennas(m: usize) -> Self {
        let coarse = match m {
            0 | 1 => 1,
            2 => 721,
            _ => 61,
        };
        Self { coarse, keep: 16, levels: 12, zoom: 4.0, local: 9 }
    }
}

/// Cell `k`'s problem flattened for fast ray evaluation.
struct RayProblem {
    own: Vec<C64>,
    /// Cross channels with their budgets.
    cross: Vec<(Vec<C64>, f64)>,
    power: f64,
    disturbance: f64,
}

impl RayProblem {
    fn new(k: usize, gamma: &ItView, net: &NetworkInstance) -> Self {
        let cross = (0..net.cells())
            .filter(|&j| j != k)
            .map(|j| (net.channel(k, j).iter().copied().collect(), gamma.outgoing(j)))
            .collect();
        Self {
            own: net.channel(k, k).iter().copied().collect(),
            cross,
            power: net.power(k),
            disturbance: gamma.incoming_sum() + net.noise(k),
        }
    }

    /// Feasible rate of unit direction `u` at the largest power every
    /// constraint allows. The objective grows with power along a fixed
    /// direction, so this is the best rank-one point on that ray.
    fn ray_value(&self, u: &[C64]) -> f64 {
        let dot = |h: &[C64]| h.iter().zip(u).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr();
        let mut p = self.power;
        for (h, budget) in &self.cross {
            let leak = dot(h);
            if leak > 0.0 {
                p = p.min(budget / leak);
            }
        }
        (p * dot(&self.own) / self.disturbance).ln_1p() / LN_2
    }

    /// Same as [`sphere_direction`] followed by [`Self::ray_value`], on the stack.
    fn angle_value(&self, x: &[f64]) -> f64 {
        let m = self.own.len();
        let mut u = [C64::new(0.0, 0.0); 3];
        let (thetas, phis) = x.split_at(m - 1);
        let mut radius = 1.0;
        for i in 0..m {
            let mag = if i + 1 == m {
                radius
            } else {
                let (s, c) = thetas[i].sin_cos();
                let mag = radius * c;
                radius *= s;
                mag
            };
            u[i] = if i == 0 { C64::new(mag, 0.0) } else { C64::from_polar(mag, phis[i - 1]) };
        }
        self.ray_value(&u[..m])
    }
}

fn bounds_for(m: usize) -> Vec<(f64, f64)> {
    let mut b = vec![(0.0, FRAC_PI_2); m - 1];
    b.extend(std::iter::repeat_n((0.0, TAU), m - 1));
    b
}

/// Visits every point of a box grid, `levels` per axis, endpoints included
/// (periodic axes skip the duplicate upper end).
fn for_each_grid_point(lo: &[f64], hi: &[f64], levels: usize, periodic: &[bool], mut f: impl FnMut(&[f64])) {
    let dims = lo.len();
    let coord = |axis: usize, i: usize| {
        if levels <= 1 {
            return 0.5 * (lo[axis] + hi[axis]);
        }
        let n = if periodic[axis] { levels } else { levels - 1 };
        lo[axis] + (hi[axis] - lo[axis]) * i as f64 / n as f64
    };
    let mut idx = vec![0usize; dims];
    let mut x: Vec<f64> = (0..dims).map(|a| coord(a, 0)).collect();
    loop {
        f(&x);
        let mut axis = 0;
        loop {
            if axis == dims {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < levels.max(1) {
                x[axis] = coord(axis, idx[axis]);
                break;
            }
            idx[axis] = 0;
            x[axis] = coord(axis, 0);
            axis += 1;
        }
    }
}

/// Maximum of cell `k`'s IT-constrained rate over rank-one covariances,
/// by exhaustive angular grid plus local zoom refinement of the best cells.
/// Supports `M_k <= 3`. Returns 0 when only zero power is feasible.
pub fn oracle_cr_max(k: usize, gamma: &ItView, net: &NetworkInstance, grid: &CrGrid) -> Result<f64> {
    net.check_cell(k)?;
    if gamma.cell() != k || gamma.cells() != net.cells() {
        return Err(Error::Dimension(format!("IT view does not match cell {k} of a {}-cell network", net.cells())));
    }
    let m = net.antennas(k);
    let problem = RayProblem::new(k, gamma, net);
    if m == 1 {
        return Ok(problem.ray_value(&[C64::new(1.0, 0.0)]));
    }
    if m > 3 {
        return Err(Error::Usage(format!("the angular oracle supports at most 3 antennas, got {m}")));
    }
    let bounds = bounds_for(m);
    let periodic: Vec<bool> = (0..2 * (m - 1)).map(|i| i >= m - 1).collect();
    let lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    let value = |x: &[f64]| problem.angle_value(x);

    // Best `keep` coarse points, sorted by decreasing value.
    let keep = grid.keep.max(1);
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(keep + 1);
    for_each_grid_point(&lo, &hi, grid.coarse, &periodic, |x| {
        let v = value(x);
        if scored.len() < keep || v > scored[scored.len() - 1].0 {
            let pos = scored.partition_point(|(w, _)| *w >= v);
            scored.insert(pos, (v, x.to_vec()));
            scored.truncate(keep);
        }
    });

    let mut best = scored[0].0.max(0.0);
    let coarse_step: Vec<f64> = bounds
        .iter()
        .zip(&periodic)
        .map(|(b, &per)| (b.1 - b.0) / (if per { grid.coarse } else { grid.coarse.saturating_sub(1).max(1) }) as f64)
        .collect();
    for (v0, x0) in scored {
        let mut center = x0;
        let mut cval = v0;
        let mut half = coarse_step.clone();
        for _ in 0..grid.levels {
            let wlo: Vec<f64> = center.iter().zip(&half).map(|(c, h)| c - h).collect();
            let whi: Vec<f64> = center.iter().zip(&half).map(|(c, h)| c + h).collect();
            let mut next = None;
            for_each_grid_point(&wlo, &whi, grid.local, &vec![false; center.len()], |x| {
                let v = value(x);
                if v > cval {
                    cval = v;
                    next = Some(x.to_vec());
                }
            });
            if let Some(x) = next {
                center = x;
            }
            for h in &mut half {
                *h /= grid.zoom;
            }
        }
        best = best.max(cval);
    }
    Ok(best)
}

/// How a region-cloud beamformer was generated.
#[derive(Debug, Clone, PartialEq)]
pub enum BeamParams {
    /// `sqrt(ρ P) · normalize(t u_mrt + (1 - t) e^{iφ} u_zf)`.
    ZfMrt { t: f64, phi: f64, rho: f64 },
    /// `sqrt(ρ P) · sphere_direction(thetas, phis)`.
    Sphere { thetas: Vec<f64>, phis: Vec<f64>, rho: f64 },
    /// Drawn directly.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub params: BeamParams,
    pub beamformer: CVector,
}

/// Rate tuples and the beamformers that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCloud {
    cells: usize,
    /// Candidate beams per user.
    beams: Vec<Vec<Beam>>,
    /// Flattened `len × cells` beam choices.
    choice: Vec<usize>,
    /// Flattened `len × cells` rates.
    rates: Vec<f64>,
}

impl RegionCloud {
    pub fn len(&self) -> usize {
        self.rates.len() / self.cells.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn rates(&self, i: usize) -> &[f64] {
        &self.rates[i * self.cells..(i + 1) * self.cells]
    }

    pub fn rate_tuples(&self) -> impl Iterator<Item = &[f64]> {
        self.rates.chunks(self.cells)
    }

    pub fn beam(&self, i: usize, k: usize) -> &Beam {
        &self.beams[k][self.choice[i * self.cells + k]]
    }

    pub fn state(&self, i: usize) -> TransmitState {
        TransmitState::from_beamformers((0..self.cells).map(|k| self.beam(i, k).beamformer.clone()).collect())
    }

    /// Indices of the non-dominated tuples.
    pub fn pareto_front(&self) -> Vec<usize> {
        let tuples: Vec<&[f64]> = self.rate_tuples().collect();
        pareto::pareto_front_indices(&tuples).expect("cloud tuples share a length and are finite")
    }
}

/// Rebuilds a beamformer from its generating parameters.
pub fn beam_from_params(k: usize, params: &BeamParams, net: &NetworkInstance) -> Result<CVector> {
    match params {
        BeamParams::ZfMrt { t, phi, rho } => {
            let u_mrt = unit(net.channel(k, k));
            let u_zf = unit(&model::zf_beamformer(k, net)?);
            let mix = u_mrt * C64::new(*t, 0.0) + u_zf * C64::from_polar(1.0 - t, *phi);
            let n = mix.norm();
            if n <= 1e-12 {
                return Err(Error::DegenerateChannel { cell: k, reason: "MRT and ZF directions cancel".into() });
            }
            Ok(mix * C64::new((rho * net.power(k)).sqrt() / n, 0.0))
        }
        BeamParams::Sphere { thetas, phis, rho } => {
            Ok(sphere_direction(thetas, phis) * C64::new((rho * net.power(k)).sqrt(), 0.0))
        }
        BeamParams::Explicit => Err(Error::Usage("explicit beams carry no generating parameters".into())),
    }
}

fn unit(v: &CVector) -> CVector {
    v / C64::new(v.norm(), 0.0)
}

fn levels_closed(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn phase_levels(n: usize) -> Vec<f64> {
    (0..n.max(1)).map(|i| TAU * i as f64 / n.max(1) as f64).collect()
}

fn power_levels(n: usize) -> Vec<f64> {
    (1..=n.max(1)).map(|i| i as f64 / n.max(1) as f64).collect()
}

/// Candidate beams for user `k`: ZF/MRT combinations when ZF exists,
/// otherwise a raw angular grid of the unit sphere.
fn user_beams(k: usize, net: &NetworkInstance, n_t: usize, n_phi: usize, n_rho: usize) -> Result<Vec<Beam>> {
    let mut params = Vec::new();
    if model::zf_beamformer(k, net).is_ok() {
        for &t in &levels_closed(n_t) {
            for &phi in &phase_levels(n_phi) {
                for &rho in &power_levels(n_rho) {
                    params.push(BeamParams::ZfMrt { t, phi, rho });
                }
            }
        }
    } else {
        let m = net.antennas(k);
        let theta_axis: Vec<f64> = levels_closed(n_t).iter().map(|v| v * FRAC_PI_2).collect();
        let mut dirs: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new())];
        for _ in 1..m {
            dirs = dirs
                .iter()
                .flat_map(|(th, _)| theta_axis.iter().map(move |t| ([th.as_slice(), &[*t]].concat(), Vec::new())))
                .collect();
        }
        for _ in 1..m {
            dirs = dirs
                .iter()
                .flat_map(|(th, ph)| {
                    phase_levels(n_phi).into_iter().map(move |p| (th.clone(), [ph.as_slice(), &[p]].concat()))
                })
                .collect();
        }
        for (thetas, phis) in dirs {
            for &rho in &power_levels(n_rho) {
                params.push(BeamParams::Sphere { thetas: thetas.clone(), phis: phis.clone(), rho });
            }
        }
    }
    params
        .into_iter()
        .filter_map(|p| match beam_from_params(k, &p, net) {
            Ok(w) => Some(Ok(Beam { params: p, beamformer: w })),
            Err(Error::DegenerateChannel { .. }) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}

/// Every combination of the two users' candidate beams, with its rate pair.
pub fn oracle_region_2user(net: &NetworkInstance, n_t: usize, n_phi: usize, n_rho: usize) -> Result<RegionCloud> {
    if net.cells() != 2 {
        return Err(Error::Usage(format!("the region oracle needs 2 cells, got {}", net.cells())));
    }
    let beams = [user_beams(0, net, n_t, n_phi, n_rho)?, user_beams(1, net, n_t, n_phi, n_rho)?];
    // Per beam: own signal power and interference caused at the other user.
    let profile = |k: usize| -> Vec<(f64, f64)> {
        beams[k]
            .iter()
            .map(|b| {
                (net.channel(k, k).dotc(&b.beamformer).norm_sqr(), net.channel(k, 1 - k).dotc(&b.beamformer).norm_sqr())
            })
            .collect()
    };
    let (p0, p1) = (profile(0), profile(1));
    let n = p0.len() * p1.len();
    let mut rates = Vec::with_capacity(2 * n);
    let mut choice = Vec::with_capacity(2 * n);
    for (a, &(s0, l0)) in p0.iter().enumerate() {
        for (b, &(s1, l1)) in p1.iter().enumerate() {
            rates.push((s0 / (l1 + net.noise(0))).ln_1p() / LN_2);
            rates.push((s1 / (l0 + net.noise(1))).ln_1p() / LN_2);
            choice.push(a);
            choice.push(b);
        }
    }
    Ok(RegionCloud { cells: 2, beams: beams.into(), choice, rates })
}

/// A two-user boundary point found by brute-force search.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    /// MRT weights `t` of the two full-power ZF/MRT combinations.
    pub t: [f64; 2],
    pub rates: [f64; 2],
    pub state: TransmitState,
}

/// Own signal power and interference caused, along the full-power ZF/MRT
/// path of one user. Both grow monotonically with `t`.
struct PathProfile {
    mrt: CVector,
    zf: CVector,
    own: CVector,
    cross: CVector,
    power: f64,
}

impl PathProfile {
    fn new(k: usize, net: &NetworkInstance) -> Result<Self> {
        Ok(Self {
            mrt: unit(net.channel(k, k)),
            zf: unit(&model::zf_beamformer(k, net)?),
            own: net.channel(k, k).clone(),
            cross: net.channel(k, 1 - k).clone(),
            power: net.power(k),
        })
    }

    fn beam(&self, t: f64) -> CVector {
        let w = &self.mrt * C64::new(t, 0.0) + &self.zf * C64::new(1.0 - t, 0.0);
        let n = w.norm();
        w * C64::new(self.power.sqrt() / n, 0.0)
    }

    /// `(signal, leak)` at `t`.
    fn at(&self, t: f64) -> (f64, f64) {
        let w = self.beam(t);
        (self.own.dotc(&w).norm_sqr(), self.cross.dotc(&w).norm_sqr())
    }

    /// Largest `t` whose leak stays within `cap` (bisection on the monotone
    /// leak), or `None` if even ZF exceeds it.
    fn max_t_within(&self, cap: f64) -> Option<f64> {
        if self.at(0.0).1 > cap {
            return None;
        }
        if self.at(1.0).1 <= cap {
            return Some(1.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.at(mid).1 <= cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Largest `R_2` subject to `R_1 >= r1`, over full-power real ZF/MRT
/// combinations (the family that contains every two-user Pareto-optimal
/// beamformer pair). For fixed `t_1` the best `t_2` is the largest one whose
/// leak keeps `R_1 >= r1`; the remaining 1-D search over `t_1` is a dense grid
/// with local zoom. `None` when `r1` is out of reach.
pub fn oracle_boundary_point_2user(net: &NetworkInstance, r1: f64) -> Result<Option<BoundaryPoint>> {
    if net.cells() != 2 {
        return Err(Error::Usage(format!("the boundary oracle needs 2 cells, got {}", net.cells())));
    }
    let paths = [PathProfile::new(0, net)?, PathProfile::new(1, net)?];
    let target = r1.exp2() - 1.0;
    let eval = |t1: f64| -> Option<(f64, f64)> {
        let (s1, l1) = paths[0].at(t1);
        let cap = s1 / target - net.noise(0);
        let t2 = if target <= 0.0 { Some(1.0) } else { paths[1].max_t_within(cap) }?;
        let (s2, _) = paths[1].at(t2);
        Some((log2_1p(s2 / (l1 + net.noise(1))), t2))
    };
    let consider = |t1: f64, best: &mut Option<(f64, f64, f64)>| {
        if let Some((r2, t2)) = eval(t1) {
            if best.is_none_or(|b| r2 > b.0) {
                *best = Some((r2, t1, t2));
            }
        }
    };
    let mut best: Option<(f64, f64, f64)> = None;
    let n = 2001;
    for i in 0..n {
        consider(i as f64 / (n - 1) as f64, &mut best);
    }
    let mut half = 1.0 / (n - 1) as f64;
    for _ in 0..25 {
        let Some((_, c, _)) = best else { break };
        for i in 0..=16 {
            consider((c - half + 2.0 * half * i as f64 / 16.0).clamp(0.0, 1.0), &mut best);
        }
        half /= 4.0;
    }
    let Some((_, t1, t2)) = best else { return Ok(None) };
    let state = TransmitState::from_beamformers(vec![paths[0].beam(t1), paths[1].beam(t2)]);
    let r = model::rate_tuple(&state, net)?;
    Ok(Some(BoundaryPoint { t: [t1, t2], rates: [r[0], r[1]], state }))
}

/// `n` boundary points with `R_1` targets evenly spaced strictly inside the
/// range swept by the boundary: from user 1's rate when it zero-forces
/// against user 2's MRT, up to its interference-free rate.
pub fn oracle_boundary_2user(net: &NetworkInstance, n: usize) -> Result<Vec<BoundaryPoint>> {
    if net.cells() != 2 {
        return Err(Error::Usage(format!("the boundary oracle needs 2 cells, got {}", net.cells())));
    }
    let zf1 = model::zf_beamformer(0, net)?;
    let mrt2 = model::mrt_beamformer(1, net)?;
    let lo = model::rate_tuple(&TransmitState::from_beamformers(vec![zf1, mrt2]), net)?[0];
    let hi = model::interference_free_rate(0, net);
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let r1 = lo + (hi - lo) * i as f64 / (n + 1) as f64;
        if let Some(p) = oracle_boundary_point_2user(net, r1)? {
            out.push(p);
        }
    }
    Ok(out)
}

/// `n_samples` random rank-one states. Sample `s` draws, for each user in
/// order, an `M_k`-vector of `CN(0, 1)` entries (direction) and one uniform
/// (power fraction), so a longer run extends a shorter one with the same seed.
pub fn random_region_sample(net: &NetworkInstance, n_samples: usize, seed: u64) -> Result<RegionCloud> {
    let k = net.cells();
    let mut stream = GaussianStream::new(seed);
    let mut beams: Vec<Vec<Beam>> = vec![Vec::with_capacity(n_samples); k];
    let mut rates = Vec::with_capacity(n_samples * k);
    let mut choice = Vec::with_capacity(n_samples * k);
    for s in 0..n_samples {
        let mut ws = Vec::with_capacity(k);
        for (cell, list) in beams.iter_mut().enumerate() {
            let mut v = stream.cn01_vector(net.antennas(cell));
            let rho = stream.uniform();
            let n = v.norm();
            if n > 0.0 {
                v *= C64::new((rho * net.power(cell)).sqrt() / n, 0.0);
            }
            ws.push(v.clone());
            list.push(Beam { params: BeamParams::Explicit, beamformer: v });
            choice.push(s);
        }
        let tuple = model::rate_tuple(&TransmitState::from_beamformers(ws), net)?;
        rates.extend_from_slice(tuple.as_slice());
    }
    Ok(RegionCloud { cells: k, beams, choice, rates })
}

/// Rates of cloud point `i` recomputed from its generating parameters.
pub fn reproduce(cloud: &RegionCloud, i: usize, net: &NetworkInstance) -> Result<RateTuple> {
    let ws = (0..cloud.cells())
        .map(|k| {
            let beam = cloud.beam(i, k);
            match beam.params {
                BeamParams::Explicit => Ok(beam.beamformer.clone()),
                ref p => beam_from_params(k, p, net),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    model::rate_tuple(&TransmitState::from_beamformers(ws), net)
}
