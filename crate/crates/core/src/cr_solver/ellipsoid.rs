//! Ellipsoid search over the scaled dual variables of one cell's problem.
//!
//! Coordinates are `x[0] = λ_kk` and `x[1 + i] = λ_i ||h̃_i||^2` for each live
//! constraint `i`, so every IT term uses a unit-norm channel.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use super::Reduced;
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Duality-gap target in bits.
    pub gap_tol: f64,
    /// Ellipsoid iterations per restart.
    pub max_iters: usize,
    /// Once the gap target is met, keep cutting until every dual coordinate
    /// is known to this relative width (or the iteration budget runs out).
    pub dual_rel_tol: f64,
    /// Radius doublings allowed when the optimum sits on the initial sphere.
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-5, max_iters: 2000, dual_rel_tol: 1e-10, max_restarts: 40 }
    }
}

pub(super) struct Search {
    /// Converged ellipsoid center projected to `x >= 0` (scaled units).
    pub point: Vec<f64>,
    /// Best dual bound seen.
    pub dual_value: f64,
    /// Direction and power scale of the best feasible primal.
    pub direction: CVector,
    pub scale: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
}

struct Eval {
    dual: f64,
    subgrad: Vec<f64>,
    direction: CVector,
    scale: f64,
    primal: f64,
}

impl Reduced {
    /// Dual value, subgradient and the feasible primal recovered along
    /// `B^{-1} h̃`. `None` when `B` is singular.
    fn evaluate(&self, x: &[f64]) -> Option<Eval> {
        let r = self.own.len();
        let mut b = CMatrix::identity(r, r) * C64::new(x[0], 0.0);
        for (l, mu) in self.live.iter().zip(&x[1..]) {
            if *mu > 0.0 {
                b += &l.dir * l.dir.adjoint() * C64::new(*mu, 0.0);
            }
        }
        let v = b.cholesky()?.solve(&self.own);
        let q = self.own.dotc(&v).re;
        if !(q > 0.0 && q.is_finite()) {
            return None;
        }
        let n = self.disturbance;
        let theta = (1.0 / LN_2 - n / q).max(0.0);
        let p = theta / q;
        let v2 = v.norm_squared();
        let leaks: Vec<f64> = self.live.iter().map(|l| l.dir.dotc(&v).norm_sqr()).collect();

        let mut dual = (theta * q / n).ln_1p() / LN_2 - theta + x[0] * self.power;
        let mut subgrad = Vec::with_capacity(x.len());
        subgrad.push(self.power - p * v2);
        for ((l, mu), leak) in self.live.iter().zip(&x[1..]).zip(&leaks) {
            dual += mu * l.budget;
            subgrad.push(l.budget - p * leak);
        }

        let mut scale = self.power / v2;
        for (l, leak) in self.live.iter().zip(&leaks) {
            if *leak > 0.0 {
                scale = scale.min(l.budget / leak);
            }
        }
        let primal = (scale * q * q / n).ln_1p() / LN_2;
        Some(Eval { dual, subgrad, direction: v, scale, primal })
    }
}

/// Deep-cut ellipsoid update keeping `{y : g·(y - c) <= -depth}`.
fn cut(center: &mut DVector<f64>, shape: &mut DMatrix<f64>, g: &DVector<f64>, depth: f64) {
    let n = center.len() as f64;
    let eg = &*shape * g;
    let geg = g.dot(&eg);
    if geg.is_nan() || geg <= 0.0 {
        return;
    }
    let root = geg.sqrt();
    let alpha = (depth / root).clamp(0.0, 0.999);
    let step = &eg / root;
    let tau = (1.0 + n * alpha) / (n + 1.0);
    let sigma = 2.0 * (1.0 + n * alpha) / ((n + 1.0) * (1.0 + alpha));
    let delta = n * n * (1.0 - alpha * alpha) / (n * n - 1.0);
    *center -= &step * tau;
    *shape = (&*shape - &step * step.transpose() * sigma) * delta;
    // Keep the shape matrix symmetric against round-off drift.
    let sym = (&*shape + shape.transpose()) * 0.5;
    *shape = sym;
}

pub(super) fn dual_search(red: &Reduced, noise: f64, own_norm2: f64, opts: &SolverOptions) -> Search {
    let h2 = red.own.norm_squared();
    if red.live.is_empty() {
        // Only the power constraint: full-power MRT in the reduced space.
        let lambda = h2 / (LN_2 * (red.disturbance + red.power * h2));
        return Search {
            point: vec![lambda],
            dual_value: (red.power * h2 / red.disturbance).ln_1p() / LN_2,
            direction: red.own.clone(),
            scale: red.power / h2,
            iterations: 0,
            restarts: 0,
            converged: true,
        };
    }

    let n = 1 + red.live.len();
    let c0 = 1.0 / (LN_2 * noise);
    let mut radius = 100.0 * (own_norm2 / (LN_2 * noise)).max(1.0);

    let mut best_dual = f64::INFINITY;
    let mut best_dual_point = vec![c0; n];
    let mut best_primal = f64::NEG_INFINITY;
    let mut best_dir = red.own.clone();
    let mut best_scale = 0.0;
    let mut iterations = 0;
    let mut restarts = 0;

    loop {
        let mut center = DVector::from_element(n, c0);
        let mut shape = DMatrix::identity(n, n) * (radius * radius);
        let mut gap_met = false;
        let mut narrow = false;

        for _ in 0..opts.max_iters {
            iterations += 1;
            let neg = (0..n).filter(|&m| center[m] < 0.0).min_by(|&a, &b| center[a].total_cmp(&center[b]));
            if let Some(m) = neg {
                let mut g = DVector::zeros(n);
                g[m] = -1.0;
                let depth = -center[m];
                cut(&mut center, &mut shape, &g, depth);
                continue;
            }
            let x: Vec<f64> = center.iter().copied().collect();
            match red.evaluate(&x) {
                None => {
                    let mut g = DVector::zeros(n);
                    g[0] = -1.0;
                    cut(&mut center, &mut shape, &g, 0.0);
                }
                Some(ev) => {
                    if ev.dual < best_dual {
                        best_dual = ev.dual;
                        best_dual_point = x.clone();
                    }
                    if ev.primal > best_primal {
                        best_primal = ev.primal;
                        best_dir = ev.direction.clone();
                        best_scale = ev.scale;
                    }
                    let width = (0..n).map(|i| shape[(i, i)].max(0.0).sqrt()).fold(0.0, f64::max);
                    let level = x.iter().copied().fold(c0, f64::max);
                    gap_met = best_dual - best_primal <= opts.gap_tol;
                    narrow = width <= opts.dual_rel_tol * level;
                    if (gap_met && narrow) || width <= 1e-15 * level {
                        break;
                    }
                    let from_start = x.iter().map(|v| (v - c0) * (v - c0)).sum::<f64>().sqrt();
                    if !gap_met && width <= 1e-3 * radius && from_start >= 0.99 * radius {
                        // Pinned to the initial sphere; the optimum lies outside.
                        break;
                    }
                    let g = DVector::from_vec(ev.subgrad);
                    if g.norm() == 0.0 {
                        narrow = true;
                        break;
                    }
                    cut(&mut center, &mut shape, &g, (ev.dual - best_dual).max(0.0));
                }
            }
        }

        let point: Vec<f64> =
            if gap_met && narrow { center.iter().map(|v| v.max(0.0)).collect() } else { best_dual_point.clone() };
        let dist = point.iter().map(|v| (v - c0) * (v - c0)).sum::<f64>().sqrt();
        if dist >= 0.99 * radius && restarts < opts.max_restarts {
            radius *= 2.0;
            restarts += 1;
            continue;
        }
        return Search {
            point,
            dual_value: best_dual,
            direction: best_dir,
            scale: best_scale,
            iterations,
            restarts,
            converged: best_dual - best_primal <= opts.gap_tol,
        };
    }
}
