use approx::assert_relative_eq;

use super::*;
use crate::model::NetworkInstance;
use crate::random::cn01_network;

fn cv(v: &[(f64, f64)]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&(re, im)| C64::new(re, im)))
}

fn two_cell(h11: CVector, h12: CVector) -> NetworkInstance {
    let m = h11.len();
    let one = |i: usize| CVector::from_fn(m, |r, _| if r == i { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    NetworkInstance::new(vec![m, m], vec![1.0, 1.0], vec![1.0, 1.0], vec![vec![h11, h12], vec![one(0), one(1)]])
        .unwrap()
}

fn view(k: usize, out: f64, inc: f64) -> ItView {
    let mut o = vec![out; 2];
    let mut i = vec![inc; 2];
    o[k] = 0.0;
    i[k] = 0.0;
    ItView::new(k, o, i).unwrap()
}

#[test]
fn inner_identity_b_hand_values() {
    let net = two_cell(cv(&[(1.0, 0.0), (0.0, 0.0)]), cv(&[(0.0, 0.0), (1.0, 0.0)]));
    let duals = DualVariables::new(0, vec![0.0, 0.0], 1.0).unwrap();
    let gamma = view(0, 0.0, 0.0);
    let InnerSolution::Bounded(inner) = inner_dual_solution(0, &duals, &gamma, &net).unwrap() else {
        panic!("identity B must be bounded");
    };
    assert_relative_eq!(inner.effective_gain, 1.0, epsilon = 1e-12);
    assert_relative_eq!(inner.water_level, 1.0 / LN_2 - 1.0, epsilon = 1e-12);
    assert!((inner.water_level - 0.4427).abs() < 1e-4);
    assert!((inner.inner_value - 0.0861).abs() < 1e-4);
    // Γ_kj = 0 and λ_kj = 0, so g adds only λ_kk P = 1.
    assert_relative_eq!(inner.dual_value, inner.inner_value + 1.0, epsilon = 1e-12);

    let (w, p) = beamformer_from_duals(0, &duals, &gamma, &net).unwrap();
    assert!((p - 0.4427).abs() < 1e-4);
    assert_relative_eq!(w[0].re, p.sqrt(), epsilon = 1e-12);
    assert!(w[1].norm() < 1e-15);
}

#[test]
fn inner_zero_duals_unbounded() {
    let net = two_cell(cv(&[(1.0, 0.0), (0.5, 0.5)]), cv(&[(0.0, 0.0), (1.0, 0.0)]));
    let duals = DualVariables::new(0, vec![0.0, 0.0], 0.0).unwrap();
    let InnerSolution::Unbounded { certificate } = inner_dual_solution(0, &duals, &view(0, 0.1, 0.0), &net).unwrap()
    else {
        panic!("B = 0 must be unbounded");
    };
    assert!(net.channel(0, 0).dotc(&certificate).norm() > 1e-6);
    assert!(beamformer_from_duals(0, &duals, &view(0, 0.1, 0.0), &net).is_err());
}

#[test]
fn rank_deficient_b_orthogonal_null_space_is_bounded() {
    // B = h_12 h_12^H has null space e_1, invisible to h_11 = e_2.
    let net = two_cell(cv(&[(0.0, 0.0), (1.0, 0.0)]), cv(&[(0.0, 0.0), (1.0, 0.0)]));
    let duals = DualVariables::new(0, vec![0.0, 2.0], 0.0).unwrap();
    let inner = inner_dual_solution(0, &duals, &view(0, 0.1, 0.0), &net).unwrap();
    assert!(matches!(inner, InnerSolution::Bounded(_)));
}

#[test]
fn subgradient_of_clipped_inner_is_constraint_levels() {
    let net = two_cell(cv(&[(1.0, 0.0), (0.0, 0.0)]), cv(&[(0.0, 0.0), (1.0, 0.0)]));
    // Huge λ_kk pushes θ to zero.
    let duals = DualVariables::new(0, vec![0.0, 0.0], 10.0).unwrap();
    let gamma = view(0, 0.3, 0.0);
    let inner = inner_dual_solution(0, &duals, &gamma, &net).unwrap();
    let g = dual_subgradient(0, &duals, &inner, &gamma, &net).unwrap();
    assert_relative_eq!(g[1], 0.3, epsilon = 1e-15);
    assert_relative_eq!(g[0], 1.0, epsilon = 1e-15);
    let (w, p) = beamformer_from_duals(0, &duals, &gamma, &net).unwrap();
    assert_eq!(p, 0.0);
    assert_eq!(w.norm(), 0.0);
}

#[test]
fn orthogonal_cross_channel_gives_mrt() {
    let net = two_cell(cv(&[(1.0, 0.0), (0.0, 0.0)]), cv(&[(0.0, 0.0), (1.0, 0.0)]));
    let sol = solve_cr(0, &view(0, 0.0, 0.0), &net, &SolverOptions::default()).unwrap();
    assert!((sol.value - 1.0).abs() < 1e-5);
    assert!((sol.beamformer[0].norm() - 1.0).abs() < 1e-5);
    assert!(sol.beamformer[1].norm() < 1e-6);
    assert_eq!(sol.duals.cross(1), 0.0);
}

#[test]
fn zero_budget_forces_zero_forcing() {
    let net = two_cell(cv(&[(1.0, 0.0), (1.0, 0.0)]), cv(&[(1.0, 0.0), (0.0, 0.0)]));
    let sol = solve_cr(0, &view(0, 0.0, 0.0), &net, &SolverOptions::default()).unwrap();
    assert!((sol.value - 1.0).abs() < 1e-5);
    assert!(sol.beamformer[0].norm() < 1e-9);
    assert!((sol.beamformer[1].norm() - 1.0).abs() < 1e-5);
    assert!(sol.duals.cross(1) > 0.0);
    assert_eq!(sol.diagnostics.zero_budget, vec![1]);
}

#[test]
fn zero_budget_parallel_channel_gives_zero_rate() {
    let net = two_cell(cv(&[(1.0, 0.0), (1.0, 1.0)]), cv(&[(2.0, 0.0), (2.0, 2.0)]));
    let sol = solve_cr(0, &view(0, 0.0, 0.0), &net, &SolverOptions::default()).unwrap();
    assert_eq!(sol.value, 0.0);
    assert_eq!(sol.beamformer.norm(), 0.0);
    // Leaking Γ along h_11 gives signal Γ ||h_11||^2 / ||h_12||^2.
    assert_relative_eq!(sol.duals.cross(1), 0.25 / LN_2, epsilon = 1e-12);
}

#[test]
fn incoming_derivative_hand_value() {
    let net = two_cell(cv(&[(1.0, 0.0), (0.0, 0.0)]), cv(&[(0.0, 0.0), (1.0, 0.0)]));
    let sol = solve_cr(0, &view(0, 0.0, 0.0), &net, &SolverOptions::default()).unwrap();
    let d = rate_derivative_incoming(0, &sol, &view(0, 0.0, 0.0), &net);
    assert!((d + 0.72135).abs() < 1e-4);
    assert!((d + 1.0 / (2.0 * LN_2)).abs() < 1e-4);
}

#[test]
fn enormous_incoming_interference_gives_near_zero_rate() {
    let net = two_cell(cv(&[(1.0, 0.0), (0.3, 0.0)]), cv(&[(0.5, 0.0), (1.0, 0.0)]));
    let sol = solve_cr(0, &view(0, 0.01, 1e9), &net, &SolverOptions::default()).unwrap();
    assert!(sol.value < 1e-5);
    assert!(sol.value >= 0.0);
}

#[test]
fn full_budgets_give_interference_free_rate() {
    let net = cn01_network(&[3, 3, 3], &[2.0, 1.0, 1.5], &[0.5, 1.0, 1.0], 11).unwrap();
    let bounds = ItVector::mrt_bounds(&net).unwrap();
    for k in 0..3 {
        let mut gamma = bounds.view(k);
        for j in (0..3).filter(|&j| j != k) {
            gamma.set_incoming(j, 0.0).unwrap();
        }
        let sol = solve_cr(k, &gamma, &net, &SolverOptions::default()).unwrap();
        let free = (net.power(k) * net.channel(k, k).norm_squared() / net.noise(k)).ln_1p() / LN_2;
        assert!((sol.value - free).abs() < 1e-5, "cell {k}: {} vs {free}", sol.value);
    }
}

#[test]
fn seeded_solutions_feasible_with_small_gap() {
    let net = cn01_network(&[2, 2, 2], &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], 3).unwrap();
    let bounds = ItVector::mrt_bounds(&net).unwrap();
    let gamma = ItVector::from_fn(3, |k, j| 0.3 * bounds.get(k, j)).unwrap();
    for sol in solve_all(&gamma, &net, &SolverOptions::default()).unwrap() {
        let d = &sol.diagnostics;
        assert!(d.duality_gap <= 1e-5 && d.duality_gap >= -1e-9, "gap {}", d.duality_gap);
        assert!(d.max_constraint_violation <= 1e-7);
        assert!(sol.power <= net.power(sol.cell) * (1.0 + 1e-7));
        assert!(d.max_slackness <= 1e-4, "slackness {}", d.max_slackness);
    }
}

#[test]
fn replayed_duals_reproduce_value() {
    let net = cn01_network(&[3, 3], &[1.0, 1.0], &[1.0, 1.0], 5).unwrap();
    let bounds = ItVector::mrt_bounds(&net).unwrap();
    let gamma = ItVector::from_fn(2, |k, j| 0.2 * bounds.get(k, j)).unwrap();
    let view0 = gamma.view(0);
    let sol = solve_cr(0, &view0, &net, &SolverOptions::default()).unwrap();
    let (w, _) = beamformer_from_duals(0, &sol.duals, &view0, &net).unwrap();
    let n = view0.incoming_sum() + net.noise(0);
    let replay = (gain(net.channel(0, 0), &w) / n).ln_1p() / LN_2;
    assert!((replay - sol.value).abs() < 1e-3, "{replay} vs {}", sol.value);
}

#[test]
fn it_vector_rejects_bad_entries() {
    let mut g = ItVector::zeros(2);
    assert!(g.set(0, 0, 1.0).is_err());
    assert!(g.set(0, 1, -1.0).is_err());
    assert!(g.set(0, 1, f64::NAN).is_err());
    g.set(0, 1, 0.5).unwrap();
    assert_eq!(g.view(1).incoming(0), 0.5);
    assert_eq!(g.view(0).outgoing(1), 0.5);
    assert_eq!(g.entries().count(), 2);
}
