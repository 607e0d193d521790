mod common;

use common::*;
use pullin_core::*;

fn problem(p: DeviceParams, nx: usize, neta: usize) -> Problem {
    Problem::new(p, nx, neta).unwrap()
}

fn small_gap(lambda: f64) -> DeviceParams {
    DeviceParams::default()
        .with_model(Model::SmallGap)
        .with_lambda(lambda)
}

#[test]
fn residual_examples() {
    let th = SolverThresholds::default();
    for model in Model::ALL {
        let pr = problem(DeviceParams::default().with_model(model).with_lambda(0.0), 33, 17);
        let r = steady_residual(&pr, &vec![0.0; 33], th.kappa_stop).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        let pr = pr.with_lambda(0.7);
        let r = steady_residual(&pr, &vec![0.0; 33], th.kappa_stop).unwrap();
        assert!(r[1..32].iter().all(|v| (v - 0.7).abs() < 1e-10), "{model:?}");
    }
}

#[test]
fn small_gap_steady_state_matches_evolution() {
    let th = SolverThresholds::default();
    let pr = problem(small_gap(0.1), 65, 9);
    let rep = newton_solve(&pr, &vec![0.0; 65], &th).unwrap();
    let u = &rep.state.u;
    assert!(rep.residual < th.newton_tol);
    assert!(u[1..64].iter().all(|&v| v > -1.0 && v < 0.0));
    assert!(is_even(u));
    let (traj, out) = run(&pr, &MembraneState::zero(pr.grid1()), &th, 50.0).unwrap();
    assert_eq!(out.kind, OutcomeKind::Converged);
    assert!(max_diff(&traj.final_state.u, u) < 1e-6);
}

#[test]
fn full_model_steady_state_is_stable_and_matches_decay() {
    let th = SolverThresholds::default();
    let pr = problem(DeviceParams::default().with_lambda(0.05), 33, 17);
    let rep = newton_solve(&pr, &vec![0.0; 33], &th).unwrap();
    let u = rep.state.u;
    assert!(rep.residual < th.newton_tol);
    assert!(u.iter().all(|&v| v <= 0.0));
    assert!(discrete_norm(pr.grid1(), &u, NormKind::L2) < 0.01);
    let stab = linear_stability(&pr, &u, th.kappa_stop).unwrap();
    assert_eq!(stab.stability, Stability::Stable);
    assert_eq!(stab.eigenvalues.len(), 31);
    let (traj, out) = run(&pr, &MembraneState::zero(pr.grid1()), &th, 50.0).unwrap();
    assert_eq!(out.kind, OutcomeKind::Converged);
    assert!(max_diff(&traj.final_state.u, &u) < 1e-6);
    let rate = decay_rate(&traj, &u).unwrap();
    assert!((rate / stab.gap - 1.0).abs() < 0.15, "{rate} vs {}", stab.gap);
}

#[test]
fn unforced_spectrum_is_the_linear_operator() {
    let p = DeviceParams::default()
        .with_model(Model::SmallDeformation)
        .with_stiffness(1.0, 0.0)
        .with_lambda(0.0);
    let pr = problem(p, 65, 9);
    let stab = linear_stability(&pr, &vec![0.0; 65], 1e-3).unwrap();
    assert!(stab.eigenvalues.iter().all(|z| z.im == 0.0 && z.re > 0.0));
    let beam = linear_operator(pr.grid1(), pr.mechanics())
        .dense()
        .symmetric_eigenvalues()
        .min();
    assert!((stab.gap - beam).abs() < 1e-8 * beam);
    assert!((stab.gap / clamped_beam_eigenvalue() - 1.0).abs() < 0.01);
}

#[test]
fn preconditioned_residual_has_the_same_roots() {
    let th = SolverThresholds::default();
    let pr = problem(DeviceParams::default().with_lambda(0.2), 33, 17);
    let preconditioned = |v: &[f64]| -> f64 {
        let f = pr.forcing(v, th.kappa_stop).unwrap();
        let h = pr.h(v);
        let rhs: Vec<f64> = (1..32).map(|i| f[i] + h[i]).collect();
        let w = pr.operator(v).solve(&rhs).unwrap();
        (1..32).map(|i| (v[i] + w[i - 1]).abs()).fold(0.0, f64::max)
    };
    let root = newton_solve(&pr, &vec![0.0; 33], &th).unwrap().state.u;
    assert!(preconditioned(&root) < 1e-9);
    let off = pr.grid1().sample(|x| bump(-0.1, x));
    let r = steady_residual(&pr, &off, th.kappa_stop).unwrap();
    assert!(max_abs(&r) > 1e-3);
    assert!(preconditioned(&off) > 1e-3);
}

#[test]
fn branch_is_monotone_and_matches_evolution() {
    let th = SolverThresholds::default();
    let pr = problem(small_gap(0.0), 65, 9);
    let br = continue_branch(&pr, 0.25, 3.0, &th).unwrap();
    assert_eq!(br.termination, BranchTermination::LambdaMax);
    assert_eq!(br.points[0].lambda, 0.0);
    assert!(br.points[0].u.iter().all(|&v| v == 0.0));
    for w in br.points.windows(2) {
        assert!(w[1].lambda > w[0].lambda);
        assert!(w[1].min_u <= w[0].min_u);
    }
    for p in &br.points {
        assert!(p.u.iter().all(|&v| v <= 0.0) && is_even(&p.u));
    }
    let picks = [1, br.points.len() / 2, br.points.len() - 1];
    for &k in &picks {
        let p = &br.points[k];
        let (traj, out) = run(&pr.with_lambda(p.lambda), &MembraneState::zero(pr.grid1()), &th, 100.0)
            .unwrap();
        assert_eq!(out.kind, OutcomeKind::Converged);
        assert!(max_diff(&traj.final_state.u, &p.u) < 1e-6, "lambda {}", p.lambda);
    }
}

#[test]
fn branch_is_continuous_in_lambda() {
    let th = SolverThresholds::default();
    let pr = problem(small_gap(0.0), 33, 9);
    let base = newton_solve(&pr.with_lambda(1.0), &vec![0.0; 33], &th).unwrap().state.u;
    let dist: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&d| {
            let u = newton_solve(&pr.with_lambda(1.0 + d), &base, &th).unwrap().state.u;
            let diff: Vec<f64> = u.iter().zip(&base).map(|(a, b)| a - b).collect();
            discrete_norm(pr.grid1(), &diff, NormKind::L2)
        })
        .collect();
    assert!(orders(&dist).iter().all(|&o| (o - 1.0).abs() < 0.05), "{dist:?}");
}

#[test]
fn fold_is_reproducible_across_initial_steps() {
    let th = SolverThresholds::default();
    let p = small_gap(0.0).with_stiffness(1.0, 0.0);
    let pr = problem(p, 33, 9);
    let brackets: Vec<(f64, f64)> = [1e-2, 5e-3]
        .iter()
        .map(|&d| {
            let br = continue_branch(&pr, d, 50.0, &th).unwrap();
            assert_eq!(br.termination, BranchTermination::Fold);
            br.fold_bracket.unwrap()
        })
        .collect();
    let (a, b) = (brackets[0], brackets[1]);
    let width = (a.1 - a.0).max(b.1 - b.0);
    let separation = (a.0.max(b.0) - a.1.min(b.1)).max(0.0);
    assert!(separation <= width, "{brackets:?}");
}

#[test]
fn pull_in_bracket_has_the_bisection_width() {
    let th = SolverThresholds::default();
    let pr = problem(small_gap(0.0), 33, 9);
    let est = estimate_pull_in(&pr, &th, 500.0, false).unwrap();
    let (lo, hi) = est.dynamic;
    let width = est.lambda_hi / f64::powi(2.0, BISECTION_STEPS as i32);
    assert!(((hi - lo) - width).abs() < 1e-12 * width);
    assert!(est.agree, "{:?} vs {:?}", est.dynamic, est.branch.fold_bracket);
    // Below the bracket the membrane settles; above it touches down.
    for (lambda, kind) in [(lo, OutcomeKind::Converged), (hi, OutcomeKind::Touchdown)] {
        let (_, out) = run(&pr.with_lambda(lambda), &MembraneState::zero(pr.grid1()), &th, 500.0)
            .unwrap();
        assert_eq!(out.kind, kind);
    }
    let parallel = estimate_pull_in(&pr, &th, 500.0, true).unwrap();
    assert_eq!(parallel, est);
}

#[test]
fn newton_rejects_infeasible_start() {
    let th = SolverThresholds::default();
    let pr = problem(small_gap(0.1), 33, 9);
    let v = pr.grid1().sample(|x| bump(-0.9999, x));
    assert!(newton_solve(&pr, &v, &th).is_err());
}
