//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line straight to
//! stderr (bypassing the test harness capture) and then asserts the verdict.

use std::f64::consts::LN_2;
use std::io::Write;
use std::process::Command;
use std::time::Instant;

use misoic::cr_solver::{
    inner_dual_solution, rate_derivative_incoming, rate_derivative_outgoing, solve_cr, CrSolution, InnerSolution,
    ItVector, SolverOptions,
};
use misoic::decentralized::{front_deficiency, run, start_point, update_direction, RunConfig, StartKind, Trajectory};
use misoic::model::{self, NetworkInstance};
use misoic::oracle::{oracle_boundary_2user, oracle_cr_max, oracle_region_2user, CrGrid};
use misoic::pareto::{
    boundary_consistency, extract_it, necessary_condition_residuals, sweep_boundary_2user, sweep_point,
    SensitivityMatrix,
};
use misoic::random::{cn01_network, GaussianStream};
use misoic::TransmitState;

fn verdict(id: u32, pass: bool, started: Instant, detail: String) {
    let line = format!(
        "{} criterion {id:>2}: {detail} [{:.1}s]\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn random_gamma(net: &NetworkInstance, stream: &mut GaussianStream) -> ItVector {
    let bounds = ItVector::mrt_bounds(net).unwrap();
    ItVector::from_fn(net.cells(), |k, j| stream.uniform() * bounds.get(k, j)).unwrap()
}

/// The 50 instances × 5 IT vectors shared by the first two criteria.
fn agreement_cases() -> Vec<(NetworkInstance, Vec<ItVector>)> {
    (0..50u64)
        .map(|seed| {
            let net = cn01_network(&[2, 2], &[1.0, 1.0], &[1.0, 1.0], 1000 + seed).unwrap();
            let mut stream = GaussianStream::new(seed);
            let gammas = (0..5).map(|_| random_gamma(&net, &mut stream)).collect();
            (net, gammas)
        })
        .collect()
}

fn example_network() -> NetworkInstance {
    cn01_network(&[3, 3], &[5.0, 1.0], &[1.0, 1.0], 1).unwrap()
}

fn rate_bits(signal: f64, noise: f64) -> f64 {
    (signal / noise).ln_1p() / LN_2
}

#[test]
fn criterion_01_solver_matches_brute_force() {
    let t = Instant::now();
    let grid = CrGrid::for_antennas(2);
    let (mut worst, mut n) = (0.0f64, 0);
    for (net, gammas) in agreement_cases() {
        for g in &gammas {
            for k in 0..2 {
                let s = solve_cr(k, &g.view(k), &net, &opts()).unwrap().value;
                let o = oracle_cr_max(k, &g.view(k), &net, &grid).unwrap();
                worst = worst.max((s - o).abs());
                n += 1;
            }
        }
    }
    verdict(1, worst <= 1e-3, t, format!("max |solver - oracle| = {worst:.2e} bits over {n} problems (tol 1e-3)"));
}

/// Gap, slackness and feasibility recomputed from the returned beamformer
/// and duals rather than read from the solver diagnostics.
fn certificate(sol: &CrSolution, g: &ItVector, net: &NetworkInstance) -> (f64, f64, f64) {
    let k = sol.cell;
    let view = g.view(k);
    let w = &sol.beamformer;
    let noise = view.incoming_sum() + net.noise(k);
    let primal = rate_bits(net.channel(k, k).dotc(w).norm_sqr(), noise);
    let InnerSolution::Bounded(inner) = inner_dual_solution(k, &sol.duals, &view, net).unwrap() else {
        panic!("reported duals give an unbounded Lagrangian");
    };
    let gap = inner.dual_value - primal;
    let power = w.norm_squared();
    let mut slack = sol.duals.power() * (net.power(k) - power).abs();
    let mut viol = (power - net.power(k)).max(0.0) / net.power(k);
    for j in (0..net.cells()).filter(|&j| j != k) {
        let leak = net.channel(k, j).dotc(w).norm_sqr();
        slack = slack.max(sol.duals.cross(j) * (view.outgoing(j) - leak).abs());
        viol = viol.max((leak - view.outgoing(j)).max(0.0) / view.outgoing(j).max(f64::MIN_POSITIVE));
    }
    (gap, slack, viol)
}

#[test]
fn criterion_02_duality_gap_slackness_feasibility() {
    let t = Instant::now();
    let (mut gap, mut slack, mut viol, mut min_gap) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for (net, gammas) in agreement_cases() {
        for g in &gammas {
            for k in 0..2 {
                let s = solve_cr(k, &g.view(k), &net, &opts()).unwrap();
                let (a, b, c) = certificate(&s, g, &net);
                gap = gap.max(a);
                min_gap = min_gap.min(a);
                slack = slack.max(b);
                viol = viol.max(c);
            }
        }
    }
    let pass = gap <= 1e-5 && min_gap >= -1e-9 && slack <= 1e-4 && viol <= 1e-7;
    verdict(
        2,
        pass,
        t,
        format!(
            "max gap {gap:.2e} (tol 1e-5, min {min_gap:.1e}), max λ·|slack| {slack:.2e} (tol 1e-4), \
             max relative violation {viol:.2e} (tol 1e-7)"
        ),
    );
}

#[test]
fn criterion_03_derivatives_match_finite_differences() {
    let t = Instant::now();
    let shapes: [&[usize]; 3] = [&[2, 2], &[3, 3, 3], &[3, 2]];
    let (mut worst, mut n) = (0.0f64, 0);
    for seed in 0..20u64 {
        let antennas = shapes[seed as usize % 3];
        let k = antennas.len();
        let net = cn01_network(antennas, &vec![1.0; k], &vec![1.0; k], 500 + seed).unwrap();
        let g = random_gamma(&net, &mut GaussianStream::new(90 + seed));
        let bounds = ItVector::mrt_bounds(&net).unwrap();
        let value = |g: &ItVector, c: usize| solve_cr(c, &g.view(c), &net, &opts()).unwrap().value;
        for c in 0..k {
            let sol = solve_cr(c, &g.view(c), &net, &opts()).unwrap();
            for (i, j, v) in g.entries().collect::<Vec<_>>() {
                if i != c && j != c {
                    continue;
                }
                let h = 1e-4 * bounds.get(i, j);
                let (mut up, mut down) = (g.clone(), g.clone());
                up.set(i, j, v + h).unwrap();
                down.set(i, j, (v - h).max(0.0)).unwrap();
                let fd = (value(&up, c) - value(&down, c)) / (up.get(i, j) - down.get(i, j));
                let an = if i == c {
                    rate_derivative_outgoing(c, j, &sol)
                } else {
                    rate_derivative_incoming(c, &sol, &g.view(c), &net)
                };
                let mag = an.abs().max(fd.abs());
                if mag > 1e-4 {
                    worst = worst.max((an - fd).abs() / mag);
                    n += 1;
                }
            }
        }
    }
    verdict(3, worst <= 1e-2, t, format!("max relative error {worst:.2e} over {n} derivatives (tol 1e-2)"));
}

#[test]
fn criterion_04_boundary_points_are_reproduced() {
    let t = Instant::now();
    let (mut good, mut total, mut worst) = (0usize, 0usize, 0.0f64);
    for seed in 0..5u64 {
        let net = cn01_network(&[2, 2], &[1.0, 1.0], &[1.0, 1.0], 3000 + seed).unwrap();
        let cloud = oracle_region_2user(&net, 1001, 1, 1).unwrap();
        for i in cloud.pareto_front() {
            let rep = boundary_consistency(&cloud.state(i), &net, 2e-3, &opts()).unwrap();
            let gap = rep.gaps.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            worst = worst.max(gap);
            total += 1;
            good += usize::from(rep.is_consistent);
        }
    }
    let frac = good as f64 / total as f64;
    verdict(
        4,
        frac >= 0.95,
        t,
        format!("{good}/{total} front points ({:.2}%) within 2e-3 bits, max |C_k - R_k| {worst:.2e}", 100.0 * frac),
    );
}

#[test]
fn criterion_05_determinant_condition() {
    let t = Instant::now();
    let (mut worst_boundary, mut n_boundary) = (0.0f64, 0);
    let (mut separated, mut certified) = (0usize, 0usize);
    for seed in 0..10u64 {
        let net = cn01_network(&[2, 2], &[1.0, 1.0], &[1.0, 1.0], 3000 + seed).unwrap();
        let bounds = ItVector::mrt_bounds(&net).unwrap();
        // Boundary points whose IT levels stay off the faces of the IT box.
        for p in oracle_boundary_2user(&net, 40).unwrap() {
            let g = extract_it(&p.state, &net).unwrap();
            if g.entries().all(|(i, j, v)| v >= 0.01 * bounds.get(i, j) && v <= 0.99 * bounds.get(i, j)) {
                let r = necessary_condition_residuals(&g, &net, &opts()).unwrap()[&(0, 1)];
                worst_boundary = worst_boundary.max(r);
                n_boundary += 1;
            }
        }
        // Interior points: guaranteed rate pairs strictly beaten by a cloud point.
        let cloud = oracle_region_2user(&net, 201, 1, 1).unwrap();
        let front: Vec<&[f64]> = cloud.pareto_front().into_iter().map(|i| cloud.rates(i)).collect();
        let mut stream = GaussianStream::new(77 + seed);
        for _ in 0..20 {
            let f12 = 0.02 + 0.96 * stream.uniform();
            let f21 = 0.02 + 0.96 * stream.uniform();
            let v = sweep_point(f12 * bounds.get(0, 1), f21 * bounds.get(1, 0), &net, &opts()).unwrap();
            if front.iter().any(|f| f[0] > v.guaranteed[0] + 1e-2 && f[1] > v.guaranteed[1] + 1e-2) {
                certified += 1;
                separated += usize::from(v.residual > 5e-3);
            }
        }
    }
    let frac = separated as f64 / certified as f64;
    let pass = n_boundary > 0 && worst_boundary <= 5e-3 && certified > 0 && frac >= 0.95;
    verdict(
        5,
        pass,
        t,
        format!(
            "boundary: max normalized |det D| {worst_boundary:.2e} at {n_boundary} points (tol 5e-3); \
             interior: {separated}/{certified} certified points above 5e-3 ({:.1}%, need 95%)",
            100.0 * frac
        ),
    );
}

#[test]
fn criterion_06_update_direction_identity() {
    let t = Instant::now();
    let mut stream = GaussianStream::new(6);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let scale = 10f64.powf(6.0 * stream.uniform() - 3.0);
        let z = [stream.cn01(), stream.cn01()];
        let (a, b, c, d) = (z[0].re * scale, z[0].im * scale, z[1].re * scale, z[1].im * scale);
        let alpha = 10f64.powf(4.0 * stream.uniform() - 2.0);
        let m = SensitivityMatrix { i: 0, j: 1, a, b, c, d };
        let dir = update_direction(&m, alpha);
        let v = [a * dir[0] + b * dir[1], c * dir[0] + d * dir[1]];
        let det = (a * d - b * c).abs();
        // Rounding of the two-term sums is bounded by this product of magnitudes.
        let size = (a.abs() + b.abs()) * (c.abs() + d.abs()) * (1.0 + alpha);
        let err = (v[0] - det * alpha).abs().max((v[1] - det).abs()) / size;
        worst = worst.max(err);
    }
    verdict(6, worst <= 1e-12, t, format!("max relative error {worst:.2e} over 10^4 random (D, α) (tol 1e-12)"));
}

fn monotone(traj: &Trajectory) -> bool {
    traj.steps.windows(2).all(|w| w[0].rates.iter().zip(&w[1].rates).all(|(a, b)| b >= a))
}

#[test]
fn criterion_07_decentralized_convergence() {
    let t = Instant::now();
    let net = example_network();
    let sweep = sweep_boundary_2user(&net, 100, &opts()).unwrap();
    let front: Vec<[f64; 2]> = sweep.front_points().map(|(_, v)| v.guaranteed).collect();
    let mut pass = sweep.failures() == 0;
    let mut parts = Vec::new();
    for (name, kind) in [("ZF", StartKind::ZeroForcing), ("MRT", StartKind::MaxRatio)] {
        let traj = run(&net, &start_point(&net, kind).unwrap(), &RunConfig::default()).unwrap();
        let def = front_deficiency(&front, traj.final_rates());
        let ok = monotone(&traj) && traj.converged && traj.outer_iterations <= 200 && def <= 0.03;
        pass &= ok;
        parts.push(format!(
            "{name} start: monotone {}, {} sweeps, terminal ({:.4}, {:.4}), deficiency {def:.4}",
            monotone(&traj),
            traj.outer_iterations,
            traj.final_rates()[0],
            traj.final_rates()[1]
        ));
    }
    verdict(7, pass, t, format!("{} (tol 0.03 bits, ≤ 200 sweeps)", parts.join("; ")));
}

#[test]
fn criterion_08_alpha_steering() {
    let t = Instant::now();
    let net = example_network();
    let terminal_c1 = |kind: StartKind, alpha: f64| {
        let mut cfg = RunConfig::default();
        cfg.alpha.insert((0, 1), alpha);
        run(&net, &start_point(&net, kind).unwrap(), &cfg).unwrap().final_rates()[0]
    };
    let (mrt1, mrt10) = (terminal_c1(StartKind::MaxRatio, 1.0), terminal_c1(StartKind::MaxRatio, 10.0));
    let (zf1, zf10) = (terminal_c1(StartKind::ZeroForcing, 1.0), terminal_c1(StartKind::ZeroForcing, 10.0));
    verdict(
        8,
        mrt10 > mrt1,
        t,
        format!(
            "MRT start: C_1 {mrt10:.6} (α_12 = 10) vs {mrt1:.6} (α_12 = 1); \
             informational ZF start: {zf10:.6} vs {zf1:.6}"
        ),
    );
}

#[test]
fn criterion_09_sweep_corners() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let (antennas, power): (&[usize], &[f64]) =
            if seed % 2 == 0 { (&[2, 2], &[1.0, 1.0]) } else { (&[3, 3], &[5.0, 1.0]) };
        let net = cn01_network(antennas, power, &[1.0, 1.0], 900 + seed).unwrap();
        let zf = model::rate_tuple(&model::zf_state(&net).unwrap(), &net).unwrap();
        let mrt = model::rate_tuple(&model::mrt_state(&net).unwrap(), &net).unwrap();
        let lo = sweep_point(0.0, 0.0, &net, &opts()).unwrap();
        let g12 = model::mrt_it_bound(0, 1, &net).unwrap();
        let g21 = model::mrt_it_bound(1, 0, &net).unwrap();
        let hi = sweep_point(g12, g21, &net, &opts()).unwrap();
        for k in 0..2 {
            worst = worst.max((lo.guaranteed[k] - zf[k]).abs()).max((hi.guaranteed[k] - mrt[k]).abs());
        }
    }
    verdict(9, worst <= 1e-6, t, format!("max corner deviation {worst:.2e} bits over 20 instances (tol 1e-6)"));
}

#[test]
fn criterion_10_tightness_and_bound() {
    let t = Instant::now();
    let (mut tight, mut over, mut n) = (0.0f64, f64::NEG_INFINITY, 0);
    let nets: Vec<NetworkInstance> = std::iter::once(example_network())
        .chain((0..4u64).map(|s| cn01_network(&[2, 2], &[1.0, 1.0], &[1.0, 1.0], 40 + s).unwrap()))
        .collect();
    for net in &nets {
        let sweep = sweep_boundary_2user(net, 60, &opts()).unwrap();
        let bound = [model::mrt_it_bound(0, 1, net).unwrap(), model::mrt_it_bound(1, 0, net).unwrap()];
        for (p, v) in sweep.front_points() {
            let state = TransmitState::from_beamformers(vec![
                v.solutions[0].beamformer.clone(),
                v.solutions[1].beamformer.clone(),
            ]);
            let caused = extract_it(&state, net).unwrap();
            let gamma = [p.gamma_12, p.gamma_21];
            let realized = [caused.get(0, 1), caused.get(1, 0)];
            for x in 0..2 {
                tight = tight.max((realized[x] - gamma[x]).abs() / bound[x]);
                over = over.max(gamma[x] - bound[x]).max(realized[x] - bound[x]);
            }
            n += 1;
        }
    }
    verdict(
        10,
        tight <= 1e-4 && over <= 1e-9,
        t,
        format!(
            "{n} front points: max |h^H S h - Γ| / Γ̄ = {tight:.2e} (tol 1e-4), max excess over Γ̄ {over:.2e} (tol 1e-9)"
        ),
    );
}

#[test]
fn criterion_11_deterministic_csv() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(
        &scenario,
        "cells = 2\nantennas = [3, 3]\npower = [5.0, 1.0]\nnoise = [1.0, 1.0]\n\n\
         [channels.generate]\nseed = 1\ndistribution = \"cn01\"\n",
    )
    .unwrap();
    let produce = |cmd: &[&str], name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_misoic"))
            .args(cmd)
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{cmd:?} failed: {}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let dec = ["decentralized", "--init", "mrt", "--alpha", "1:2:10"];
    let (d1, d2) = (produce(&dec, "d1.csv"), produce(&dec, "d2.csv"));
    let sw = ["sweep", "--grid", "60"];
    let (s1, s2) = (produce(&sw, "s1.csv"), produce(&sw, "s2.csv"));
    let pass = d1 == d2 && s1 == s2 && !d1.is_empty() && !s1.is_empty();
    verdict(
        11,
        pass,
        t,
        format!(
            "decentralized {} bytes identical: {}; sweep {} bytes identical: {}",
            d1.len(),
            d1 == d2,
            s1.len(),
            s1 == s2
        ),
    );
}
