//! Primal-dual full splitting for `min f(x) + h(x)` subject to `Ax = b`.
//!
//! The method is the fast forward-backward iteration with unit step applied to the
//! saddle-point inclusion in the metric
//! `N(x, λ) = (x/τ - A^T λ, -Ax + λ/σ)`, written out as explicit primal and dual
//! updates. [`FlagState`] implements a faster Lagrangian-based comparison method and
//! [`SaddleInclusion`] exposes the same inclusion to the generic solvers.

mod flag;
mod saddle;

pub use flag::*;
pub use saddle::*;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ffb::{correction_coeff, max_step_size, momentum_coeff};
use crate::linalg::{check_dim, is_finite, operator_norm, DenseMap, LinearMap, Vector, DEFAULT_NORM_MAX_ITER, DEFAULT_NORM_TOL};
use crate::operators::{ProxFunction, SmoothTerm};

/// Linearly constrained composite problem `min f(x) + h(x)` s.t. `Ax = b`.
#[derive(Clone)]
pub struct PdProblem {
    pub f: Arc<dyn ProxFunction>,
    pub h: Arc<dyn SmoothTerm>,
    pub a: DenseMap,
    pub b: Vector,
    a_norm: f64,
}

impl PdProblem {
    pub fn new(f: Arc<dyn ProxFunction>, h: Arc<dyn SmoothTerm>, a: DenseMap, b: Vector) -> Result<Self> {
        check_dim(f.dim(), a.in_dim())?;
        check_dim(h.dim(), a.in_dim())?;
        check_dim(a.out_dim(), b.len())?;
        if !(h.beta() > 0.0) {
            return Err(Error::Config(format!("smooth term needs beta > 0, got {}", h.beta())));
        }
        let a_norm = operator_norm(&a, DEFAULT_NORM_TOL, DEFAULT_NORM_MAX_ITER).value;
        Ok(Self { f, h, a, b, a_norm })
    }

    pub fn primal_dim(&self) -> usize {
        self.a.in_dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.a.out_dim()
    }

    /// Estimated `||A||`.
    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn beta(&self) -> f64 {
        self.h.beta()
    }

    /// `(f + h)(x)`.
    pub fn objective(&self, x: &Vector) -> f64 {
        self.f.value(x) + self.h.value(x)
    }

    /// `Ax - b`.
    pub fn constraint_residual(&self, x: &Vector) -> Vector {
        self.a.apply(x) - &self.b
    }

    /// `||Ax - b||`.
    pub fn feasibility(&self, x: &Vector) -> f64 {
        self.constraint_residual(x).norm()
    }

    /// `L(x, λ) = f(x) + h(x) + <λ, Ax - b>`.
    pub fn lagrangian(&self, x: &Vector, lam: &Vector) -> f64 {
        self.objective(x) + lam.dot(&self.constraint_residual(x))
    }

    /// One step of the unaccelerated primal-dual map whose fixed points are the
    /// saddle points:
    /// `x+ = prox_{τf}(x - τ∇h(x) - τA^T λ)`, `λ+ = λ + σ(A(2x+ - x) - b)`.
    pub fn saddle_map(&self, params: &PdParams, x: &Vector, lam: &Vector) -> (Vector, Vector) {
        let (tau, sigma) = (params.tau, params.sigma);
        let arg = x - (self.h.gradient(x) + self.a.adjoint_apply(lam)) * tau;
        let x_next = self.f.prox(tau, &arg);
        let lam_next = lam + (self.a.apply(&(&x_next * 2.0 - x)) - &self.b) * sigma;
        (x_next, lam_next)
    }

    /// Fixed-point residual `||(x, λ) - T(x, λ)||` of [`PdProblem::saddle_map`].
    pub fn saddle_residual(&self, params: &PdParams, x: &Vector, lam: &Vector) -> f64 {
        let (xn, ln) = self.saddle_map(params, x, lam);
        ((x - xn).norm_squared() + (lam - ln).norm_squared()).sqrt()
    }
}

/// `L(x, λ*) - L(x*, λ)`, nonnegative when `(x*, λ*)` is a saddle point.
pub fn lagrangian_gap(problem: &PdProblem, x: &Vector, lam: &Vector, x_star: &Vector, lam_star: &Vector) -> f64 {
    problem.lagrangian(x, lam_star) - problem.lagrangian(x_star, lam)
}

/// Lower and upper bounds on `F(x) - F*` from a certificate `w - A^T λ ∈ ∂f(x)`:
///
/// ```text
/// -||λ*|| ||Ax - b|| <= F(x) - F* <= ||λ*|| ||Ax - b|| + <w + ∇h(x), x - x*> + <b - Ax, λ - λ*>
/// ```
pub fn objective_bounds(
    problem: &PdProblem,
    x: &Vector,
    lam: &Vector,
    w: &Vector,
    x_star: &Vector,
    lam_star: &Vector,
) -> (f64, f64) {
    let r = problem.constraint_residual(x);
    let slack = lam_star.norm() * r.norm();
    let upper = slack + (w + problem.h.gradient(x)).dot(&(x - x_star)) - r.dot(&(lam - lam_star));
    (-slack, upper)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdParams {
    pub alpha: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl PdParams {
    pub fn new(alpha: f64, tau: f64, sigma: f64) -> Self {
        Self { alpha, tau, sigma }
    }

    /// Strong-positivity modulus `min(1/τ, 1/σ)(1 - sqrt(τσ) ||A||)` of the metric.
    pub fn metric_modulus(&self, a_norm: f64) -> f64 {
        (1.0 / self.tau).min(1.0 / self.sigma) * (1.0 - (self.tau * self.sigma).sqrt() * a_norm)
    }

    /// Checks `α > 2`, `τσ||A||² < 1` and
    /// `1 < min(1/τ, 1/σ)(1 - sqrt(τσ)||A||) · 8(α-1)β/(5α-2)`.
    pub fn validate(&self, problem: &PdProblem) -> Result<()> {
        let (alpha, tau, sigma) = (self.alpha, self.tau, self.sigma);
        if !(alpha > 2.0) || !alpha.is_finite() {
            return Err(Error::Config(format!("alpha > 2 violated: alpha = {alpha}")));
        }
        if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) {
            return Err(Error::Config(format!("tau, sigma > 0 violated: tau = {tau}, sigma = {sigma}")));
        }
        let a_norm = problem.a_norm();
        let prod = tau * sigma * a_norm * a_norm;
        if !(prod < 1.0) {
            return Err(Error::Config(format!("tau sigma ||A||^2 < 1 violated: {prod}")));
        }
        let bound = self.metric_modulus(a_norm) * max_step_size(alpha, problem.beta());
        if 1.0 < bound {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "1 < min(1/tau, 1/sigma)(1 - sqrt(tau sigma)||A||) 8(alpha-1)beta/(5alpha-2) violated: {bound}"
            )))
        }
    }
}

/// `τ = σ = 0.99β / (β||A|| + 1 - 0.99·3(α-2)/(8(α-1)))`, or `0.99/||A||` when `h = 0`.
pub fn pd_default_steps(alpha: f64, problem: &PdProblem) -> Result<PdParams> {
    if !(alpha > 2.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("alpha > 2 violated: alpha = {alpha}")));
    }
    let beta = problem.beta();
    let a_norm = problem.a_norm();
    let step = if beta.is_finite() {
        0.99 * beta / (beta * a_norm + 1.0 - 0.99 * 3.0 * (alpha - 2.0) / (8.0 * (alpha - 1.0)))
    } else if a_norm > 0.0 {
        0.99 / a_norm
    } else {
        return Err(Error::Config("no finite default step for h = 0 and A = 0".into()));
    };
    let params = PdParams::new(alpha, step, step);
    params.validate(problem)?;
    Ok(params)
}

/// Iterates of the primal-dual method at index `k >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdState {
    pub k: usize,
    pub x_prev: Vector,
    pub x: Vector,
    pub lam_prev: Vector,
    pub lam: Vector,
    /// Primal extrapolation `v_{k-1}`; not tracked by the alternative form.
    pub v: Option<Vector>,
    /// Dual extrapolation `η_{k-1}`; not tracked by the alternative form.
    pub dual_extrap: Option<Vector>,
    /// `w_k ∈ ∂f(x_k) + A^T λ_k`.
    pub w: Vector,
    /// `∇h(x_{k-1})`
    pub grad_prev: Vector,
    /// `∇h(x_k)`
    pub grad: Vector,
}

/// `x_1 = prox_{τf}(v_0 - τA^T η_0 - τ∇h(x_0))`,
/// `λ_1 = η_0 + σ(Ax_1 - b) + σA(x_1 - v_0)`.
pub fn pd_init(
    problem: &PdProblem,
    params: &PdParams,
    x0: Vector,
    v0: Vector,
    lam0: Vector,
    eta0: Vector,
) -> Result<PdState> {
    params.validate(problem)?;
    for v in [&x0, &v0] {
        check_dim(problem.primal_dim(), v.len())?;
    }
    for v in [&lam0, &eta0] {
        check_dim(problem.dual_dim(), v.len())?;
    }
    let grad0 = problem.h.gradient(&x0);
    let (x1, lam1, w1) = primal_dual_update(problem, params, &v0, &eta0, &grad0);
    let grad1 = problem.h.gradient(&x1);
    if !(is_finite(&x1) && is_finite(&lam1) && is_finite(&w1) && is_finite(&grad1)) {
        return Err(Error::Diverged { k: 1 });
    }
    Ok(PdState {
        k: 1,
        x_prev: x0,
        x: x1,
        lam_prev: lam0,
        lam: lam1,
        v: Some(v0),
        dual_extrap: Some(eta0),
        w: w1,
        grad_prev: grad0,
        grad: grad1,
    })
}

/// Prox step, linear dual step and certificate from extrapolated points.
fn primal_dual_update(
    problem: &PdProblem,
    params: &PdParams,
    v: &Vector,
    eta: &Vector,
    grad: &Vector,
) -> (Vector, Vector, Vector) {
    let (tau, sigma) = (params.tau, params.sigma);
    let x_next = problem.f.prox(tau, &(v - (problem.a.adjoint_apply(eta) + grad) * tau));
    let ax = problem.a.apply(&x_next);
    let lam_next = eta + (&ax - &problem.b) * sigma + (&ax - problem.a.apply(v)) * sigma;
    let w_next = (v - &x_next) / tau + problem.a.adjoint_apply(&(&lam_next - eta)) - grad;
    (x_next, lam_next, w_next)
}

impl PdState {
    /// Zero initialization `x_0 = v_0 = 0`, `λ_0 = η_0 = 0`.
    pub fn from_origin(problem: &PdProblem, params: &PdParams) -> Result<Self> {
        let (n, m) = (problem.primal_dim(), problem.dual_dim());
        pd_init(problem, params, Vector::zeros(n), Vector::zeros(n), Vector::zeros(m), Vector::zeros(m))
    }

    /// One iteration of the four-line update. Requires the extrapolation history.
    pub fn step(&mut self, problem: &PdProblem, params: &PdParams) -> Result<()> {
        let (Some(v_prev), Some(eta_prev)) = (self.v.as_ref(), self.dual_extrap.as_ref()) else {
            return Err(Error::Config("state carries no extrapolation history; continue with step_alternative".into()));
        };
        let a = momentum_coeff(params.alpha, self.k);
        let b = correction_coeff(params.alpha, self.k);
        let v = &self.x + (&self.x - &self.x_prev) * a + (v_prev - &self.x) * b;
        let eta = &self.lam + (&self.lam - &self.lam_prev) * a + (eta_prev - &self.lam) * b;
        let (x_next, lam_next, w_next) = primal_dual_update(problem, params, &v, &eta, &self.grad);
        let grad_next = problem.h.gradient(&x_next);
        if !(is_finite(&x_next) && is_finite(&lam_next) && is_finite(&w_next) && is_finite(&grad_next)) {
            return Err(Error::Diverged { k: self.k + 1 });
        }
        self.v = Some(v);
        self.dual_extrap = Some(eta);
        self.advance(x_next, lam_next, w_next, grad_next);
        Ok(())
    }

    /// One iteration of the equivalent recursion in `(x, λ, w)` only. Afterwards the
    /// extrapolation history is cleared.
    pub fn step_alternative(&mut self, problem: &PdProblem, params: &PdParams) -> Result<()> {
        let (tau, sigma) = (params.tau, params.sigma);
        let a = momentum_coeff(params.alpha, self.k);
        let b = correction_coeff(params.alpha, self.k);
        let dx = (&self.x - &self.x_prev) * a;
        let dlam = (&self.lam - &self.lam_prev) * a;
        let corr = (&self.w + &self.grad_prev) * b;
        let arg = &self.x - (&self.grad + problem.a.adjoint_apply(&(&self.lam + &dlam))) * tau + &dx + &corr * tau;
        let x_next = problem.f.prox(tau, &arg);
        let ax = problem.a.apply(&self.x);
        let ax_next = problem.a.apply(&x_next);
        let lam_next = &self.lam + (&ax_next - &problem.b) * sigma + &dlam
            + (&ax_next - &ax - problem.a.apply(&dx)) * sigma
            - (ax - &problem.b) * (b * sigma);
        let w_next = (&self.x - &x_next + &dx) / tau - problem.a.adjoint_apply(&(&self.lam - &lam_next + &dlam))
            + corr
            - &self.grad;
        let grad_next = problem.h.gradient(&x_next);
        if !(is_finite(&x_next) && is_finite(&lam_next) && is_finite(&w_next) && is_finite(&grad_next)) {
            return Err(Error::Diverged { k: self.k + 1 });
        }
        self.v = None;
        self.dual_extrap = None;
        self.advance(x_next, lam_next, w_next, grad_next);
        Ok(())
    }

    fn advance(&mut self, x_next: Vector, lam_next: Vector, w_next: Vector, grad_next: Vector) {
        self.x_prev = std::mem::replace(&mut self.x, x_next);
        self.lam_prev = std::mem::replace(&mut self.lam, lam_next);
        self.grad_prev = std::mem::replace(&mut self.grad, grad_next);
        self.w = w_next;
        self.k += 1;
    }

    pub fn primal_velocity(&self) -> f64 {
        (&self.x - &self.x_prev).norm()
    }

    pub fn dual_velocity(&self) -> f64 {
        (&self.lam - &self.lam_prev).norm()
    }

    /// `||(x_k - x_{k-1}, λ_k - λ_{k-1})||`.
    pub fn velocity(&self) -> f64 {
        self.primal_velocity().hypot(self.dual_velocity())
    }

    /// Dual certificate `ζ_k = -A v_{k-1} + η_{k-1}/σ + A x_k - λ_k/σ`, which equals
    /// `b - A x_k`. `None` after an alternative-form step.
    pub fn dual_certificate(&self, problem: &PdProblem, params: &PdParams) -> Option<Vector> {
        let v = self.v.as_ref()?;
        let eta = self.dual_extrap.as_ref()?;
        let sigma = params.sigma;
        Some(problem.a.apply(&(&self.x - v)) + (eta - &self.lam) / sigma)
    }

    /// `||(w_k + ∇h(x_k), b - A x_k)||`, the norm of a certified element of the
    /// saddle operator at `(x_k, λ_k)`.
    pub fn tangent_residual(&self, problem: &PdProblem) -> f64 {
        let primal = (&self.w + &self.grad).norm_squared();
        let dual = problem.constraint_residual(&self.x).norm_squared();
        (primal + dual).sqrt()
    }
}
