//! Faster Lagrangian-based method with an averaged primal sequence.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, is_finite, LinearMap, Vector};

use super::PdProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlagParams {
    pub tau: f64,
    pub r: f64,
    pub theta: f64,
}

impl FlagParams {
    /// `r = 1`, `θ = 1` and `τ = β/(β||A||² + 1)` (`1/||A||²` when `h = 0`).
    pub fn defaults(problem: &PdProblem) -> Result<Self> {
        let beta = problem.beta();
        let a2 = problem.a_norm().powi(2);
        let tau = if beta.is_finite() {
            beta / (beta * a2 + 1.0)
        } else if a2 > 0.0 {
            1.0 / a2
        } else {
            return Err(Error::Config("no finite default step for h = 0 and A = 0".into()));
        };
        let p = Self { tau, r: 1.0, theta: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau > 0 violated: {}", self.tau)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Config(format!("r > 0 violated: {}", self.r)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta in (0, 1] violated: {}", self.theta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlagState {
    pub k: usize,
    pub x_prev: Vector,
    pub x: Vector,
    pub x_bar: Vector,
    pub lam_prev: Vector,
    pub lam: Vector,
}

impl FlagState {
    /// `x_1 = x̄_1 = x0`, `λ_1 = lam0`.
    pub fn new(problem: &PdProblem, params: &FlagParams, x0: Vector, lam0: Vector) -> Result<Self> {
        params.validate()?;
        check_dim(problem.primal_dim(), x0.len())?;
        check_dim(problem.dual_dim(), lam0.len())?;
        Ok(Self { k: 1, x_prev: x0.clone(), x_bar: x0.clone(), x: x0, lam_prev: lam0.clone(), lam: lam0 })
    }

    pub fn from_origin(problem: &PdProblem, params: &FlagParams) -> Result<Self> {
        Self::new(problem, params, Vector::zeros(problem.primal_dim()), Vector::zeros(problem.dual_dim()))
    }

    /// ```text
    /// x̄_{k+1} = prox_{τf}(x̄_k - τ(∇h(x̄_k) + A^T λ_k + r A^T(A x̄_k - b)) - τ r k A^T(A x_k - b))
    /// λ_{k+1} = λ_k + θ r (A x̄_{k+1} - b)
    /// x_{k+1} = (1 - 1/(k+1)) x_k + x̄_{k+1}/(k+1)
    /// ```
    pub fn step(&mut self, problem: &PdProblem, params: &FlagParams) -> Result<()> {
        let (tau, r, k) = (params.tau, params.r, self.k as f64);
        let a = &problem.a;
        let dual = &self.lam
            + problem.constraint_residual(&self.x_bar) * r
            + problem.constraint_residual(&self.x) * (r * k);
        let arg = &self.x_bar - (problem.h.gradient(&self.x_bar) + a.adjoint_apply(&dual)) * tau;
        let x_bar = problem.f.prox(tau, &arg);
        let lam = &self.lam + problem.constraint_residual(&x_bar) * (params.theta * r);
        let x = &self.x * (1.0 - 1.0 / (k + 1.0)) + &x_bar / (k + 1.0);
        if !(is_finite(&x_bar) && is_finite(&lam) && is_finite(&x)) {
            return Err(Error::Diverged { k: self.k + 1 });
        }
        self.x_prev = std::mem::replace(&mut self.x, x);
        self.lam_prev = std::mem::replace(&mut self.lam, lam);
        self.x_bar = x_bar;
        self.k += 1;
        Ok(())
    }

    pub fn primal_velocity(&self) -> f64 {
        (&self.x - &self.x_prev).norm()
    }

    pub fn dual_velocity(&self) -> f64 {
        (&self.lam - &self.lam_prev).norm()
    }

    pub fn velocity(&self) -> f64 {
        self.primal_velocity().hypot(self.dual_velocity())
    }
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

    fn abs_problem() -> PdProblem {
        PdProblem::new(Arc::new(L1Norm::new(1)), Arc::new(ZeroSmooth::new(1)), DenseMap::identity(1), scalar(1.0))
            .unwrap()
    }

    #[test]
    fn hand_trace() {
        // x_1 = x̄_1 = 0, λ_1 = 0, τ = r = θ = 1, k = 1:
        // x̄_2 = prox_{|.|}(0 - (0 + 0 + (-1)) - 1·(-1)) = prox(2) = 1,
        // λ_2 = 0 + (1 - 1) = 0, x_2 = 0/2 + 1/2 = 0.5.
        let p = abs_problem();
        let params = FlagParams { tau: 1.0, r: 1.0, theta: 1.0 };
        let mut s = FlagState::from_origin(&p, &params).unwrap();
        s.step(&p, &params).unwrap();
        assert_eq!(s.x_bar, scalar(1.0));
        assert_eq!(s.lam, scalar(0.0));
        assert_eq!(s.x, scalar(0.5));
    }

    #[test]
    fn feasible_stationary_start() {
        let p = abs_problem();
        let params = FlagParams::defaults(&p).unwrap();
        let mut s = FlagState::new(&p, &params, scalar(1.0), scalar(-1.0)).unwrap();
        for _ in 0..5 {
            s.step(&p, &params).unwrap();
            assert_eq!(s.x, scalar(1.0));
            assert_eq!(s.lam, scalar(-1.0));
        }
    }

    #[test]
    fn defaults_and_ranges() {
        let h = quadratic_term(DenseMap::identity(1), scalar(0.0)).unwrap();
        let p = PdProblem::new(Arc::new(L1Norm::new(1)), Arc::new(h), DenseMap::from_diagonal(&[2.0]), scalar(1.0))
            .unwrap();
        let d = FlagParams::defaults(&p).unwrap();
        let beta = p.beta();
        assert!((d.tau - beta / (4.0 * beta + 1.0)).abs() < 1e-12);
        assert_eq!((d.r, d.theta), (1.0, 1.0));
        assert!(FlagParams { theta: 1.5, ..d }.validate().is_err());
        assert!(FlagParams { r: 0.0, ..d }.validate().is_err());
    }
}
