use misoic::cr_solver::{ItVector, SolverOptions};
use misoic::oracle::{oracle_boundary_2user, oracle_region_2user};
use misoic::pareto::{boundary_consistency, extract_it, necessary_condition_residuals, sweep_boundary_2user};
use misoic::random::cn01_network;

#[test]
fn refined_cloud_front_weakly_dominates_coarse_front() {
    let net = cn01_network(&[2, 2], &[1.0, 1.0], &[1.0, 1.0], 11).unwrap();
    let coarse = oracle_region_2user(&net, 11, 4, 3).unwrap();
    let fine = oracle_region_2user(&net, 21, 8, 3).unwrap();
    let fine_front: Vec<&[f64]> = fine.pareto_front().into_iter().map(|i| fine.rates(i)).collect();
    for i in coarse.pareto_front() {
        let p = coarse.rates(i);
        assert!(
            fine_front.iter().any(|f| f[0] >= p[0] - 1e-12 && f[1] >= p[1] - 1e-12),
            "coarse front point {p:?} not covered by the refined front"
        );
    }
}

#[test]
fn boundary_points_are_consistent_and_stationary() {
    let opts = SolverOptions::default();
    let net = cn01_network(&[2, 2], &[1.0, 1.0], &[1.0, 1.0], 21).unwrap();
    let bounds = ItVector::mrt_bounds(&net).unwrap();
    for p in oracle_boundary_2user(&net, 8).unwrap() {
        let report = boundary_consistency(&p.state, &net, 1e-4, &opts).unwrap();
        assert!(report.is_consistent, "gaps {:?}", report.gaps);
        let g = extract_it(&p.state, &net).unwrap();
        if g.entries().all(|(k, j, v)| v > 0.01 * bounds.get(k, j) && v < 0.99 * bounds.get(k, j)) {
            let r = necessary_condition_residuals(&g, &net, &opts).unwrap()[&(0, 1)];
            assert!(r <= 5e-3, "residual {r} at t = {:?}", p.t);
        }
    }
}

#[test]
fn sweep_front_is_not_beaten_by_the_oracle_boundary() {
    let opts = SolverOptions::default();
    let net = cn01_network(&[2, 2], &[1.0, 1.0], &[1.0, 1.0], 31).unwrap();
    let sweep = sweep_boundary_2user(&net, 30, &opts).unwrap();
    assert_eq!(sweep.failures(), 0);
    let front: Vec<[f64; 2]> = sweep.front_points().map(|(_, v)| v.guaranteed).collect();
    // Every guaranteed pair is achievable, so no oracle point may lie strictly
    // outside the sweep by more than the grid resolution allows.
    for p in oracle_boundary_2user(&net, 10).unwrap() {
        let short = misoic::decentralized::front_deficiency(&front, &p.rates);
        assert!(short < 0.1, "oracle point {:?} is {short} bits beyond the sweep", p.rates);
    }
    for (_, v) in sweep.front_points() {
        for k in 0..2 {
            assert!((v.actual[k] - v.guaranteed[k]).abs() <= 1e-4);
        }
    }
}
