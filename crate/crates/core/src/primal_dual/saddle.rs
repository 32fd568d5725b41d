//! The saddle-point inclusion of a constrained problem in whitened coordinates.
//!
//! With `N = [[I/τ, -A^T], [-A, I/σ]] = L L^T`, the primal-dual pair `z = (x, λ)` is
//! mapped to `u = L^T z`. In these coordinates the Euclidean norm is the `N`-norm,
//! `N^{-1}P` becomes a maximally monotone operator with a closed-form unit-step
//! resolvent and `N^{-1}Q` a `βρ`-cocoercive map, so the generic solvers apply. The
//! fast forward-backward iteration with unit step reproduces the primal-dual method.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{LinearMap, Vector};
use crate::operators::{CocoerciveMap, InclusionProblem, ResolventOperator};

use super::{PdParams, PdProblem};

struct Core {
    problem: PdProblem,
    params: PdParams,
    /// Lower Cholesky factor of `N`.
    chol: DMatrix<f64>,
    beta: f64,
}

impl Core {
    fn n(&self) -> usize {
        self.problem.primal_dim()
    }

    fn split(&self, z: &Vector) -> (Vector, Vector) {
        let n = self.n();
        (z.rows(0, n).into_owned(), z.rows(n, z.len() - n).into_owned())
    }

    fn join(x: &Vector, lam: &Vector) -> Vector {
        let mut z = Vector::zeros(x.len() + lam.len());
        z.rows_mut(0, x.len()).copy_from(x);
        z.rows_mut(x.len(), lam.len()).copy_from(lam);
        z
    }

    fn whiten(&self, z: &Vector) -> Vector {
        self.chol.tr_mul(z)
    }

    fn unwhiten(&self, u: &Vector) -> Vector {
        self.chol.tr_solve_lower_triangular(u).expect("Cholesky factor has a positive diagonal")
    }
}

/// Whitened saddle-point inclusion for a constrained problem and fixed `(τ, σ)`.
#[derive(Clone)]
pub struct SaddleInclusion {
    core: Arc<Core>,
}

impl SaddleInclusion {
    pub fn new(problem: &PdProblem, params: &PdParams) -> Result<Self> {
        params.validate(problem)?;
        let metric = metric_matrix(problem, params);
        let chol = metric
            .cholesky()
            .ok_or_else(|| Error::Config("metric is not positive definite for these tau, sigma".into()))?
            .l();
        let beta = problem.beta() * params.metric_modulus(problem.a_norm());
        Ok(Self { core: Arc::new(Core { problem: problem.clone(), params: *params, chol, beta }) })
    }

    pub fn dim(&self) -> usize {
        self.core.chol.nrows()
    }

    /// `u = L^T (x, λ)`.
    pub fn to_whitened(&self, x: &Vector, lam: &Vector) -> Vector {
        self.core.whiten(&Core::join(x, lam))
    }

    /// `(x, λ) = L^{-T} u`.
    pub fn from_whitened(&self, u: &Vector) -> (Vector, Vector) {
        self.core.split(&self.core.unwhiten(u))
    }

    /// The inclusion `0 ∈ M(u) + C(u)`; only the unit step is admissible.
    pub fn inclusion(&self) -> InclusionProblem {
        InclusionProblem {
            m: Arc::new(SaddleResolvent(self.core.clone())),
            c: Arc::new(SaddleGradient(self.core.clone())),
        }
    }

    pub fn problem(&self) -> &PdProblem {
        &self.core.problem
    }

    pub fn params(&self) -> &PdParams {
        &self.core.params
    }
}

/// `N = [[I/τ, -A^T], [-A, I/σ]]`, materialized for diagnostics.
pub fn metric_matrix(problem: &PdProblem, params: &PdParams) -> DMatrix<f64> {
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    let a = problem.a.matrix();
    let mut nm = DMatrix::zeros(n + m, n + m);
    nm.view_mut((0, 0), (n, n)).fill_diagonal(1.0 / params.tau);
    nm.view_mut((n, n), (m, m)).fill_diagonal(1.0 / params.sigma);
    nm.view_mut((n, 0), (m, n)).copy_from(&(-a));
    nm.view_mut((0, n), (n, m)).copy_from(&(-a.transpose()));
    nm
}

struct SaddleResolvent(Arc<Core>);

impl ResolventOperator for SaddleResolvent {
    fn dim(&self) -> usize {
        self.0.chol.nrows()
    }

    /// Solves `N z + P z ∋ L w` and returns `L^T z`.
    fn resolvent(&self, gamma: f64, w: &Vector) -> Vector {
        assert!(gamma == 1.0, "the whitened saddle resolvent is only available for unit step");
        let core = &self.0;
        let (p, q) = core.split(&(&core.chol * w));
        let (tau, sigma) = (core.params.tau, core.params.sigma);
        let x = core.problem.f.prox(tau, &(p * tau));
        let lam = (q + core.problem.a.apply(&x) * 2.0 - &core.problem.b) * sigma;
        core.whiten(&Core::join(&x, &lam))
    }

    fn check_step(&self, gamma: f64) -> Result<()> {
        if gamma == 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("the saddle inclusion requires gamma = 1, got {gamma}")))
        }
    }
}

struct SaddleGradient(Arc<Core>);

impl CocoerciveMap for SaddleGradient {
    fn dim(&self) -> usize {
        self.0.chol.nrows()
    }

    /// `L^{-1} (∇h(x), 0)` with `(x, λ) = L^{-T} u`.
    fn apply(&self, u: &Vector) -> Vector {
        let core = &self.0;
        let (x, lam) = core.split(&core.unwhiten(u));
        let g = Core::join(&core.problem.h.gradient(&x), &Vector::zeros(lam.len()));
        core.chol.solve_lower_triangular(&g).expect("Cholesky factor has a positive diagonal")
    }

    fn beta(&self) -> f64 {
        self.0.beta
    }

    fn is_zero(&self) -> bool {
        self.0.problem.h.is_zero()
    }
}
