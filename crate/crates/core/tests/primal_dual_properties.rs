use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use splitkit::bench::{generate_problem, reference_solution, run_method, value_at};
use splitkit::bench::{Checkpoints, MethodConfig, MethodName, Quantity, ReferenceConfig};
use splitkit::linalg::{DenseMap, Vector};
use splitkit::primal_dual::*;

fn rel(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

#[test]
fn alternative_form_tracks_the_four_line_form() {
    let g = generate_problem(10, 20, 30, 3).unwrap();
    let params = pd_default_steps(5.0, &g.problem).unwrap();
    let mut a = PdState::from_origin(&g.problem, &params).unwrap();
    let mut b = a.clone();
    for _ in 0..1000 {
        a.step(&g.problem, &params).unwrap();
        b.step_alternative(&g.problem, &params).unwrap();
        assert!(rel(&a.x, &b.x) <= 1e-10 && rel(&a.lam, &b.lam) <= 1e-10, "k {}", a.k);
        assert!(rel(&a.w, &b.w) <= 1e-10);
    }
}

#[test]
fn default_steps_are_admissible_on_random_operators() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..5 {
        let (m, n) = (3 + trial, 12 + 2 * trial);
        let base = generate_problem(m, 6, n, trial as u64).unwrap();
        let scale = 0.1 + 10.0 * rng.random::<f64>();
        let a = DMatrix::from_fn(m, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let x = Vector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let b = &a * x;
        let problem = PdProblem::new(base.problem.f.clone(), base.problem.h.clone(), DenseMap::new(a), b).unwrap();
        for alpha in [3.0, 5.0, 10.0] {
            let params = pd_default_steps(alpha, &problem).unwrap();
            params.validate(&problem).unwrap();
            assert!(PdState::from_origin(&problem, &params).is_ok());
        }
    }
}

#[test]
fn certificate_and_dual_identity_along_a_run() {
    let g = generate_problem(8, 16, 32, 4).unwrap();
    let p = &g.problem;
    let params = pd_default_steps(5.0, p).unwrap();
    let mut state = PdState::from_origin(p, &params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    while state.k < 2000 {
        state.step(p, &params).unwrap();
        if state.k % 100 != 0 {
            continue;
        }
        let zeta = state.dual_certificate(p, &params).unwrap();
        let target = -p.constraint_residual(&state.x);
        assert!((zeta - &target).norm() <= 1e-12 * (1.0 + target.norm() + state.lam.norm() / params.sigma));
        let u = &state.w - p.a.matrix().transpose() * &state.lam;
        let fx = p.f.value(&state.x);
        for _ in 0..20 {
            let y = Vector::from_fn(p.primal_dim(), |_, _| rng.sample(StandardNormal));
            let scale = 1.0 + fx.abs() + u.norm() * (&y - &state.x).norm();
            assert!(p.f.value(&y) >= fx + u.dot(&(&y - &state.x)) - 1e-8 * scale);
        }
    }
}

#[test]
fn objective_error_is_sandwiched_and_gap_shrinks() {
    let g = generate_problem(20, 50, 100, 2024).unwrap();
    let p = &g.problem;
    let cfg = ReferenceConfig { budget: 1_000_000, alpha: 10.0, cache_dir: None };
    let (r, _) = reference_solution(p, &g.hash, &cfg).unwrap();
    let params = pd_default_steps(5.0, p).unwrap();
    let mut state = PdState::from_origin(p, &params).unwrap();
    let mut gaps = Vec::new();
    while state.k < 10_000 {
        state.step(p, &params).unwrap();
        if state.k % 50 == 0 {
            let (lo, hi) = objective_bounds(p, &state.x, &state.lam, &state.w, &r.x_star, &r.lam_star);
            let err = p.objective(&state.x) - r.f_star;
            let tol = 1e-6 * (1.0 + r.f_star.abs());
            assert!(lo - tol <= err && err <= hi + tol, "k {}: {lo} <= {err} <= {hi}", state.k);
        }
        if state.k == 100 || state.k == 10_000 {
            gaps.push(lagrangian_gap(p, &state.x, &state.lam, &r.x_star, &r.lam_star));
        }
    }
    assert!(gaps[1] <= gaps[0], "{gaps:?}");
}

#[test]
fn fixture_rates_are_faster_than_one_over_k() {
    let g = generate_problem(20, 50, 100, 2024).unwrap();
    let out = run_method(&g.problem, &MethodConfig::new(MethodName::Fpd), 10_000, &Checkpoints::default(), false, None)
        .unwrap();
    for q in [Quantity::VelocityPrimal, Quantity::VelocityDual, Quantity::Feasibility, Quantity::Rtan] {
        let early = 100.0 * value_at(&out.records, q, 100).unwrap();
        let late = 10_000.0 * value_at(&out.records, q, 10_000).unwrap();
        assert!(late < early, "{}: {early} -> {late}", q.name());
    }
}

#[test]
fn flag_defaults_run_on_the_fixture() {
    let g = generate_problem(20, 50, 100, 2024).unwrap();
    let params = FlagParams::defaults(&g.problem).unwrap();
    assert_eq!((params.r, params.theta), (1.0, 1.0));
    let beta = g.problem.beta();
    let a = g.problem.a_norm();
    assert!((params.tau - beta / (beta * a * a + 1.0)).abs() <= 1e-15 * params.tau);
    let out = run_method(&g.problem, &MethodConfig::new(MethodName::Flag), 5000, &Checkpoints::default(), false, None)
        .unwrap();
    let first = out.records.first().unwrap().feasibility;
    assert!(out.records.last().unwrap().feasibility < first);
    assert!(out.records.iter().all(|r| r.rtan.is_none() && r.rfix.is_none()));
}
