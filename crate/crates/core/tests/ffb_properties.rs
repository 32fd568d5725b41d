use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use splitkit::bench::{fit_rate_slope_window, generate_problem, reference_solution, run_method, value_at};
use splitkit::bench::{Checkpoints, MethodConfig, MethodName, Quantity, ReferenceConfig};
use splitkit::ffb::*;
use splitkit::linalg::{DenseMap, Vector};
use splitkit::operators::{affine_projection_resolvent, quadratic_term, GradientMap, InclusionProblem, L1Norm};
use splitkit::operators::{Subdifferential, ZeroMap};
use splitkit::primal_dual::{pd_default_steps, SaddleInclusion};

fn random_inclusion(seed: u64, n: usize) -> InclusionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |r, c| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = DenseMap::new(normal(n / 3, n));
    let b = normal(n / 3, 1).column(0).into_owned();
    let bm = DenseMap::new(normal(n / 2, n));
    let c = normal(n / 2, 1).column(0).into_owned();
    InclusionProblem::new(
        Arc::new(affine_projection_resolvent(&a, &b).unwrap()),
        Arc::new(GradientMap(Arc::new(quadratic_term(bm, c).unwrap()))),
    )
    .unwrap()
}

fn rel(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

#[test]
fn both_forms_agree_over_a_thousand_steps() {
    for (seed, alpha) in [(1, 3.0), (2, 5.0), (3, 20.0)] {
        let inc = random_inclusion(seed, 50);
        let params = FfbParams::with_default_step(alpha, inc.beta()).unwrap();
        let mut y = FfbState::from_origin(&inc, &params).unwrap();
        let mut xi = y.clone();
        for _ in 0..1000 {
            y.step_y(&inc, &params).unwrap();
            xi.step_xi(&inc, &params).unwrap();
            assert!(rel(&y.z, &xi.z) <= 1e-10, "seed {seed} k {}", y.k);
        }
    }
}

#[test]
fn xi_identity_and_residual_inequality_hold_along_a_run() {
    let inc = random_inclusion(4, 40);
    let params = FfbParams::with_default_step(5.0, inc.beta()).unwrap();
    let mut state = FfbState::from_origin(&inc, &params).unwrap();
    for _ in 0..500 {
        let c_before = state.c.clone();
        state.step_y(&inc, &params).unwrap();
        let identity = (&state.y_prev - &state.z) / params.gamma - &c_before;
        assert!(rel(&identity, &state.xi) <= 1e-12);
        let rfix = fixed_point_residual(&state.z, &inc, params.gamma);
        let rtan = tangent_residual(&state);
        assert!(rfix <= params.gamma * rtan * (1.0 + 1e-12));
    }
}

#[test]
fn monotonicity_certificate_against_the_solution() {
    let g = generate_problem(6, 15, 30, 5).unwrap();
    let cfg = ReferenceConfig { budget: 200_000, alpha: 10.0, cache_dir: None };
    let (r, _) = reference_solution(&g.problem, &g.hash, &cfg).unwrap();
    assert!(r.converged);
    let saddle = SaddleInclusion::new(&g.problem, &pd_default_steps(5.0, &g.problem).unwrap()).unwrap();
    let inc = saddle.inclusion();
    let z_star = saddle.to_whitened(&r.x_star, &r.lam_star);
    let params = FfbParams::new(5.0, 1.0).unwrap();
    let mut state = FfbState::from_origin(&inc, &params).unwrap();
    for _ in 0..3000 {
        state.step_y(&inc, &params).unwrap();
        let d = &state.z - &z_star;
        let v = &state.xi + &state.c;
        let scale = 1.0 + d.norm() * v.norm();
        assert!(d.dot(&v) >= -1e-10 * scale, "k {}: {}", state.k, d.dot(&v));
    }
}

#[test]
fn velocity_and_tangent_residual_decay_faster_than_one_over_k() {
    let g = generate_problem(20, 50, 100, 2024).unwrap();
    let out = run_method(&g.problem, &MethodConfig::new(MethodName::Ffb), 10_000, &Checkpoints::default(), false, None)
        .unwrap();
    let fit = fit_rate_slope_window(&out.records, Quantity::Velocity, 1000, 10_000).unwrap();
    assert!(fit.slope <= -1.0, "slope {}", fit.slope);
    for q in [Quantity::Velocity, Quantity::Rtan] {
        let scaled: Vec<f64> = [100, 1000, 10_000].iter().map(|&k| k as f64 * value_at(&out.records, q, k).unwrap()).collect();
        assert!(scaled[0] > scaled[1] && scaled[1] > scaled[2], "{}: {scaled:?}", q.name());
    }
}

#[test]
fn energy_forms_agree_and_lower_bound_holds_on_a_small_inclusion() {
    let m = Subdifferential(Arc::new(L1Norm::new(3)));
    let inc = InclusionProblem::new(Arc::new(m), Arc::new(ZeroMap::new(3))).unwrap();
    let params = FfbParams::new(5.0, 0.7).unwrap();
    let z0 = Vector::from_vec(vec![3.0, -2.0, 0.5]);
    let mut state = ffb_init(&inc, &params, z0.clone(), z0).unwrap();
    let p = EnergyParams::for_solver(&params, inc.beta()).unwrap();
    let z_star = Vector::zeros(3);
    for _ in 0..200 {
        state.step_y(&inc, &params).unwrap();
        let (e1, e2) = (energy_e(&state, &z_star, &p), energy_e_expanded(&state, &z_star, &p));
        assert!((e1 - e2).abs() <= 1e-9 * e1.abs().max(1.0));
        let f = energy_f(&state, &z_star, &p);
        assert!(f >= energy_lower_bound(&state, &z_star, &p) - 1e-12 * f.abs().max(1.0));
    }
    assert!(inc.c.is_zero());
}

#[test]
fn eta_interval_stays_nonempty_near_two() {
    let (lo, hi) = admissible_eta_interval(2.0 + 1e-9).unwrap();
    assert!(lo < hi);
    assert!(hi <= (5.0 * (2.0 + 1e-9) - 2.0) / 8.0);
}
