//! Fast Forward-Backward splitting for `0 ∈ M(z) + C(z)`.
//!
//! The iteration combines a momentum term `z_k - z_{k-1}` with a correction term
//! `y_{k-1} - z_k` and evaluates the cocoercive part at `z_k`:
//!
//! ```text
//! y_k     = z_k + (1 - α/(k+α)) (z_k - z_{k-1}) + (1 - α/(2(k+α))) (y_{k-1} - z_k)
//! z_{k+1} = J_{γM}(y_k - γ C(z_k))
//! ```
//!
//! Both the `(z, y)` form and the equivalent `(z, ξ)` form are provided. The state
//! maintains `ξ_k = (y_{k-1} - z_k)/γ - C(z_{k-1}) ∈ M(z_k)`, which certifies the
//! tangent residual `||ξ_k + C(z_k)||`.

mod lyapunov;

pub use lyapunov::*;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, is_finite, Vector};
use crate::operators::InclusionProblem;

pub const DEFAULT_ALPHA: f64 = 5.0;

/// Fraction of [`max_step_size`] used when no step is given.
pub const DEFAULT_STEP_FRACTION: f64 = 0.99;

/// Exclusive upper bound `8(α-1)β/(5α-2)` on the step size.
pub fn max_step_size(alpha: f64, beta: f64) -> f64 {
    8.0 * (alpha - 1.0) * beta / (5.0 * alpha - 2.0)
}

/// Momentum coefficient `1 - α/(k+α)`.
#[inline]
pub(crate) fn momentum_coeff(alpha: f64, k: usize) -> f64 {
    1.0 - alpha / (k as f64 + alpha)
}

/// Correction coefficient `1 - α/(2(k+α)) = (2k+α)/(2(k+α))`.
#[inline]
pub(crate) fn correction_coeff(alpha: f64, k: usize) -> f64 {
    1.0 - alpha / (2.0 * (k as f64 + alpha))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FfbParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl FfbParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 2.0) || !alpha.is_finite() {
            return Err(Error::Config(format!("alpha > 2 violated: alpha = {alpha}")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("gamma > 0 violated: gamma = {gamma}")));
        }
        Ok(Self { alpha, gamma })
    }

    /// `gamma = 0.99 * max_step_size(alpha, beta)`.
    pub fn with_default_step(alpha: f64, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Config("default step needs a finite cocoercivity modulus".into()));
        }
        Self::new(alpha, DEFAULT_STEP_FRACTION * max_step_size(alpha, beta))
    }

    /// Checks `0 < gamma < 8(α-1)β/(5α-2)`.
    pub fn validate(&self, beta: f64) -> Result<()> {
        Self::new(self.alpha, self.gamma)?;
        let bound = max_step_size(self.alpha, beta);
        if self.gamma < bound {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "step size condition gamma < 8(alpha-1)beta/(5alpha-2) violated: {} >= {}",
                self.gamma, bound
            )))
        }
    }
}

/// Rolling window of the iteration at index `k >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FfbState {
    pub k: usize,
    /// `z_{k-1}`
    pub z_prev: Vector,
    /// `z_k`
    pub z: Vector,
    /// `y_{k-1}`
    pub y_prev: Vector,
    /// `ξ_k ∈ M(z_k)`
    pub xi: Vector,
    /// `C(z_{k-1})`
    pub c_prev: Vector,
    /// `C(z_k)`
    pub c: Vector,
}

/// Builds the state at `k = 1`: `z_1 = J_{γM}(y_0 - γ C(z_0))` and
/// `ξ_1 = (y_0 - z_1)/γ - C(z_0)`.
pub fn ffb_init(problem: &InclusionProblem, params: &FfbParams, z0: Vector, y0: Vector) -> Result<FfbState> {
    params.validate(problem.beta())?;
    problem.m.check_step(params.gamma)?;
    check_dim(problem.dim(), z0.len())?;
    check_dim(problem.dim(), y0.len())?;
    let gamma = params.gamma;
    let c0 = problem.c.apply(&z0);
    let z1 = problem.forward_backward(gamma, &y0, &c0);
    let xi = (&y0 - &z1) / gamma - &c0;
    let c1 = problem.c.apply(&z1);
    if !(is_finite(&z1) && is_finite(&xi) && is_finite(&c1)) {
        return Err(Error::Diverged { k: 1 });
    }
    Ok(FfbState { k: 1, z_prev: z0, z: z1, y_prev: y0, xi, c_prev: c0, c: c1 })
}

impl FfbState {
    /// Starts from `z_0 = y_0 = 0`.
    pub fn from_origin(problem: &InclusionProblem, params: &FfbParams) -> Result<Self> {
        let n = problem.dim();
        ffb_init(problem, params, Vector::zeros(n), Vector::zeros(n))
    }

    /// One step of the `(z, y)` form. On divergence `self` is left unchanged.
    pub fn step_y(&mut self, problem: &InclusionProblem, params: &FfbParams) -> Result<()> {
        let (alpha, gamma, k) = (params.alpha, params.gamma, self.k);
        let y = &self.z
            + (&self.z - &self.z_prev) * momentum_coeff(alpha, k)
            + (&self.y_prev - &self.z) * correction_coeff(alpha, k);
        let z_next = problem.forward_backward(gamma, &y, &self.c);
        let xi_next = (&y - &z_next) / gamma - &self.c;
        self.advance(problem, y, z_next, xi_next)
    }

    /// One step of the equivalent `(z, ξ)` form:
    ///
    /// ```text
    /// z_{k+1} = J_{γM}(z_k - γC(z_k) + a_k (z_k - z_{k-1}) + b_k γ (ξ_k + C(z_{k-1})))
    /// ξ_{k+1} = (z_k - z_{k+1} + a_k (z_k - z_{k-1}))/γ + b_k (ξ_k + C(z_{k-1})) - C(z_k)
    /// ```
    ///
    /// with `a_k = 1 - α/(k+α)` and `b_k = (2k+α)/(2(k+α))`.
    pub fn step_xi(&mut self, problem: &InclusionProblem, params: &FfbParams) -> Result<()> {
        let (alpha, gamma, k) = (params.alpha, params.gamma, self.k);
        let a = momentum_coeff(alpha, k);
        let b = (2.0 * k as f64 + alpha) / (2.0 * (k as f64 + alpha));
        let momentum = (&self.z - &self.z_prev) * a;
        let corr = (&self.xi + &self.c_prev) * b;
        let arg = &self.z - &self.c * gamma + &momentum + &corr * gamma;
        let z_next = problem.m.resolvent(gamma, &arg);
        let xi_next = (&self.z - &z_next + &momentum) / gamma + &corr - &self.c;
        let y = arg + &self.c * gamma;
        self.advance(problem, y, z_next, xi_next)
    }

    fn advance(&mut self, problem: &InclusionProblem, y: Vector, z_next: Vector, xi_next: Vector) -> Result<()> {
        let c_next = problem.c.apply(&z_next);
        if !(is_finite(&z_next) && is_finite(&xi_next) && is_finite(&c_next) && is_finite(&y)) {
            return Err(Error::Diverged { k: self.k + 1 });
        }
        self.z_prev = std::mem::replace(&mut self.z, z_next);
        self.c_prev = std::mem::replace(&mut self.c, c_next);
        self.y_prev = y;
        self.xi = xi_next;
        self.k += 1;
        Ok(())
    }

    /// Discrete velocity `||z_k - z_{k-1}||`.
    pub fn velocity(&self) -> f64 {
        (&self.z - &self.z_prev).norm()
    }

    /// `ξ_k + C(z_{k-1})`, the quantity driving the energy functions.
    pub fn shifted_xi(&self) -> Vector {
        &self.xi + &self.c_prev
    }
}

/// `||ξ_k + C(z_k)||`, an upper bound on `dist(0, M(z_k) + C(z_k))` certified by
/// `ξ_k ∈ M(z_k)`.
pub fn tangent_residual(state: &FfbState) -> f64 {
    (&state.xi + &state.c).norm()
}

/// `||z - J_{γM}(z - γ C(z))||`.
pub fn fixed_point_residual(z: &Vector, problem: &InclusionProblem, gamma: f64) -> f64 {
    let cz = problem.c.apply(z);
    fixed_point_residual_with(z, &cz, problem, gamma)
}

/// [`fixed_point_residual`] with a precomputed `C(z)`.
pub fn fixed_point_residual_with(z: &Vector, cz: &Vector, problem: &InclusionProblem, gamma: f64) -> f64 {
    (z - problem.forward_backward(gamma, z, cz)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::linalg::DenseMap;
    use crate::operators::*;

    fn scalar(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn identity_gradient(n: usize) -> Arc<dyn CocoerciveMap> {
        // C(z) = z with beta = 0.999 after the safety shrink.
        let h = quadratic_term(DenseMap::identity(n), Vector::zeros(n)).unwrap();
        Arc::new(GradientMap(Arc::new(h)))
    }

    fn abs_problem() -> InclusionProblem {
        InclusionProblem::new(Arc::new(Subdifferential(Arc::new(L1Norm::new(1)))), Arc::new(ZeroMap::new(1))).unwrap()
    }

    #[test]
    fn max_step_examples() {
        assert!((max_step_size(10.0, 1.0) - 1.5).abs() < 1e-15);
        let near_two = max_step_size(2.01, 1.0);
        assert!((near_two - 8.0 * 1.01 / 8.05).abs() < 1e-15);
        assert!((near_two - 1.003_726_708).abs() < 1e-8);
        assert!((max_step_size(1e12, 1.0) - 1.6).abs() < 1e-9);
        assert!((max_step_size(2.0 + 1e-12, 1.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn params_are_validated() {
        assert!(FfbParams::new(2.0, 0.1).is_err());
        assert!(FfbParams::new(3.0, 0.0).is_err());
        let p = FfbParams::new(10.0, 1.5).unwrap();
        assert!(p.validate(1.0).is_err());
        assert!(FfbParams::new(10.0, 1.49).unwrap().validate(1.0).is_ok());
        let d = FfbParams::with_default_step(5.0, 2.0).unwrap();
        assert!((d.gamma - 0.99 * max_step_size(5.0, 2.0)).abs() < 1e-15);
    }

    #[test]
    fn init_on_trivial_problem_is_a_fixed_point() {
        let prob = InclusionProblem::new(Arc::new(zero_resolvent(2)), Arc::new(ZeroMap::new(2))).unwrap();
        let v = Vector::from_column_slice(&[1.5, -2.0]);
        let s = ffb_init(&prob, &FfbParams::new(3.0, 1.0).unwrap(), v.clone(), v.clone()).unwrap();
        assert_eq!(s.z, v);
        assert_eq!(s.xi, Vector::zeros(2));
    }

    #[test]
    fn init_soft_threshold_example() {
        let prob = abs_problem();
        let s = ffb_init(&prob, &FfbParams::new(3.0, 1.0).unwrap(), scalar(0.0), scalar(3.0)).unwrap();
        assert_eq!(s.z, scalar(2.0));
        assert_eq!(s.xi, scalar(1.0));
        // ξ_1 = 1 is the subgradient of |.| at 2, and C = 0.
        assert_eq!(tangent_residual(&s), 1.0);
    }

    #[test]
    fn init_at_stationary_point() {
        // M = ∂|.|, C = 0, z* = 0: 0 ∈ ∂|0|.
        let prob = abs_problem();
        let s = ffb_init(&prob, &FfbParams::new(3.0, 0.5).unwrap(), scalar(0.0), scalar(0.0)).unwrap();
        assert_eq!(s.z, scalar(0.0));
        assert_eq!(tangent_residual(&s), 0.0);
    }

    #[test]
    fn init_rejects_bad_step() {
        let prob = InclusionProblem::new(Arc::new(zero_resolvent(1)), identity_gradient(1)).unwrap();
        let err = ffb_init(&prob, &FfbParams::new(3.0, 5.0).unwrap(), scalar(0.0), scalar(0.0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    fn hand_trace_state(prob: &InclusionProblem) -> FfbState {
        // z_0 = z_1 = y_0 = 1 at k = 1; ξ_1 chosen so that the ξ-identity holds:
        // ξ_1 = (y_0 - z_1)/γ - C(z_0) = -1.
        FfbState {
            k: 1,
            z_prev: scalar(1.0),
            z: scalar(1.0),
            y_prev: scalar(1.0),
            xi: scalar(-1.0),
            c_prev: prob.c.apply(&scalar(1.0)),
            c: prob.c.apply(&scalar(1.0)),
        }
    }

    #[test]
    fn step_y_hand_trace() {
        // M = 0, C(z) = z, α = 3, γ = 0.5: y_1 = 1 + (3/4)·0 + (5/8)·0 = 1 and
        // z_2 = 1 - 0.5·1 = 0.5.
        let prob = InclusionProblem::new(Arc::new(zero_resolvent(1)), identity_gradient(1)).unwrap();
        let params = FfbParams::new(3.0, 0.5).unwrap();
        let mut s = hand_trace_state(&prob);
        s.step_y(&prob, &params).unwrap();
        assert_eq!(s.y_prev, scalar(1.0));
        assert!((s.z[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.k, 2);

        let mut t = hand_trace_state(&prob);
        t.step_xi(&prob, &params).unwrap();
        assert!((t.z[0] - s.z[0]).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_is_preserved_by_both_forms() {
        let prob = abs_problem();
        let params = FfbParams::new(4.0, 0.7).unwrap();
        let s0 = FfbState {
            k: 3,
            z_prev: scalar(0.0),
            z: scalar(0.0),
            y_prev: scalar(0.0),
            xi: scalar(0.0),
            c_prev: scalar(0.0),
            c: scalar(0.0),
        };
        let mut a = s0.clone();
        a.step_y(&prob, &params).unwrap();
        let mut b = s0.clone();
        b.step_xi(&prob, &params).unwrap();
        for s in [a, b] {
            assert_eq!(s.z, s0.z);
            assert_eq!(s.xi, s0.xi);
            assert_eq!(s.k, 4);
        }
    }

    #[test]
    fn xi_identity_holds_after_each_step() {
        let prob = InclusionProblem::new(Arc::new(Subdifferential(Arc::new(L1Norm::new(3)))), identity_gradient(3))
            .unwrap();
        let params = FfbParams::with_default_step(5.0, prob.beta()).unwrap();
        let mut s = ffb_init(&prob, &params, Vector::from_column_slice(&[1.0, -2.0, 0.1]), Vector::zeros(3)).unwrap();
        for _ in 0..50 {
            s.step_xi(&prob, &params).unwrap();
            let identity = (&s.y_prev - &s.z) / params.gamma - &s.c_prev;
            let scale = s.y_prev.norm().max(s.z.norm()).max(1.0) / params.gamma;
            assert!((&s.xi - identity).norm() <= 1e-14 * scale);
        }
    }

    #[test]
    fn fixed_point_residual_examples() {
        let prob = InclusionProblem::new(Arc::new(zero_resolvent(1)), identity_gradient(1)).unwrap();
        // C(1) = 1 exactly for B = I, c = 0.
        assert!((fixed_point_residual(&scalar(1.0), &prob, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(fixed_point_residual(&scalar(0.0), &prob, 0.5), 0.0);
    }

    #[test]
    fn divergence_leaves_state_untouched() {
        struct Exploding;
        impl CocoerciveMap for Exploding {
            fn dim(&self) -> usize {
                1
            }
            fn apply(&self, z: &Vector) -> Vector {
                if z[0] != 0.0 {
                    scalar(f64::NAN)
                } else {
                    scalar(0.0)
                }
            }
            fn beta(&self) -> f64 {
                1.0
            }
        }
        let prob = InclusionProblem::new(Arc::new(zero_resolvent(1)), Arc::new(Exploding)).unwrap();
        let params = FfbParams::new(3.0, 0.5).unwrap();
        let mut s = ffb_init(&prob, &params, scalar(0.0), scalar(1.0)).unwrap_err();
        assert!(matches!(s, Error::Diverged { k: 1 }));
        s = Error::Config(String::new());
        let _ = s;

        let mut st = ffb_init(&prob, &params, scalar(0.0), scalar(0.0)).unwrap();
        st.y_prev = scalar(1.0);
        let before = st.clone();
        assert!(matches!(st.step_y(&prob, &params), Err(Error::Diverged { k: 2 })));
        assert_eq!(st, before);
    }
}
