//! Resolvent-capable monotone operators, cocoercive maps and the prox catalog used by
//! the solvers.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, operator_norm, DenseMap, LinearMap, Vector, DEFAULT_NORM_MAX_ITER, DEFAULT_NORM_TOL};

/// Safety factor applied to `1/||B||^2` when deriving the cocoercivity modulus of a
/// quadratic term, so that an estimate slightly below the true norm never produces a
/// step size outside the strict admissible range.
pub const BETA_SHRINK: f64 = 0.999;

/// A maximally monotone operator `M` accessed through its resolvent
/// `J_{gamma M} = (Id + gamma M)^{-1}`.
///
/// Resolvents are firmly nonexpansive: `||Jx - Jy||^2 <= <x - y, Jx - Jy>`.
pub trait ResolventOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn resolvent(&self, gamma: f64, v: &Vector) -> Vector;

    /// Rejects step sizes for which the resolvent is not available in closed form.
    fn check_step(&self, gamma: f64) -> Result<()> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("resolvent step must be positive and finite, got {gamma}")))
        }
    }
}

/// A single-valued `beta`-cocoercive map:
/// `<C z - C y, z - y> >= beta ||C z - C y||^2`.
pub trait CocoerciveMap: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, z: &Vector) -> Vector;
    /// Cocoercivity modulus; `f64::INFINITY` for the zero map.
    fn beta(&self) -> f64;
    fn is_zero(&self) -> bool {
        false
    }
}

/// Convex differentiable function with `(1/beta)`-Lipschitz gradient.
pub trait SmoothTerm: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn beta(&self) -> f64;
    fn is_zero(&self) -> bool {
        false
    }
}

/// Proper, lower semicontinuous convex function with a computable proximal map
/// `prox_{t f}(v) = argmin_x f(x) + ||x - v||^2 / (2t)`.
pub trait ProxFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn prox(&self, t: f64, v: &Vector) -> Vector;
}

/// `0 ∈ M(z) + C(z)`.
#[derive(Clone)]
pub struct InclusionProblem {
    pub m: Arc<dyn ResolventOperator>,
    pub c: Arc<dyn CocoerciveMap>,
}

impl InclusionProblem {
    pub fn new(m: Arc<dyn ResolventOperator>, c: Arc<dyn CocoerciveMap>) -> Result<Self> {
        check_dim(m.dim(), c.dim())?;
        Ok(Self { m, c })
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn beta(&self) -> f64 {
        self.c.beta()
    }

    /// One forward-backward evaluation `J_{gamma M}(v - gamma C(z))`.
    pub fn forward_backward(&self, gamma: f64, v: &Vector, cz: &Vector) -> Vector {
        self.m.resolvent(gamma, &(v - cz * gamma))
    }
}

/// Componentwise soft thresholding `sign(v_i) max(|v_i| - t, 0)`.
pub fn soft_threshold(v: &Vector, t: f64) -> Vector {
    v.map(|x| x.signum() * (x.abs() - t).max(0.0))
}

/// Proximal map of `t ||.||_1`.
pub fn prox_l1(v: &Vector, t: f64) -> Result<Vector> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("prox_l1 requires t > 0, got {t}")));
    }
    Ok(soft_threshold(v, t))
}

/// `weight * ||x||_1`.
#[derive(Debug, Clone)]
pub struct L1Norm {
    dim: usize,
    weight: f64,
}

impl L1Norm {
    pub fn new(dim: usize) -> Self {
        Self { dim, weight: 1.0 }
    }

    pub fn weighted(dim: usize, weight: f64) -> Self {
        assert!(weight >= 0.0);
        Self { dim, weight }
    }
}

impl ProxFunction for L1Norm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.lp_norm(1)
    }

    fn prox(&self, t: f64, v: &Vector) -> Vector {
        soft_threshold(v, t * self.weight)
    }
}

/// The zero function; its prox is the identity.
#[derive(Debug, Clone)]
pub struct ZeroFunction {
    dim: usize,
}

impl ZeroFunction {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ProxFunction for ZeroFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn prox(&self, _t: f64, v: &Vector) -> Vector {
        v.clone()
    }
}

/// Subdifferential `∂f` of a [`ProxFunction`], whose resolvent is `prox_{gamma f}`.
#[derive(Clone)]
pub struct Subdifferential(pub Arc<dyn ProxFunction>);

impl ResolventOperator for Subdifferential {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn resolvent(&self, gamma: f64, v: &Vector) -> Vector {
        self.0.prox(gamma, v)
    }
}

/// `M = 0`, resolvent is the identity for every step.
#[derive(Debug, Clone)]
pub struct ZeroResolvent {
    dim: usize,
}

pub fn zero_resolvent(dim: usize) -> ZeroResolvent {
    ZeroResolvent { dim }
}

impl ResolventOperator for ZeroResolvent {
    fn dim(&self) -> usize {
        self.dim
    }

    fn resolvent(&self, _gamma: f64, v: &Vector) -> Vector {
        v.clone()
    }
}

/// Normal cone of the affine set `{x : Ax = b}`. The resolvent is the Euclidean
/// projection `v - A^+ (A v - b)`, independent of the step.
#[derive(Debug, Clone)]
pub struct AffineProjection {
    a: DMatrix<f64>,
    b: Vector,
    pinv: DMatrix<f64>,
}

/// Relative residual above which `Ax = b` is declared inconsistent.
const CONSISTENCY_TOL: f64 = 1e-9;

pub fn affine_projection_resolvent(a: &DenseMap, b: &Vector) -> Result<AffineProjection> {
    check_dim(a.out_dim(), b.len())?;
    let m = a.matrix().clone();
    let pinv = m
        .clone()
        .pseudo_inverse(1e-12 * m.norm().max(1.0))
        .map_err(|e| Error::Domain(e.to_string()))?;
    let x = &pinv * b;
    let residual = (&m * &x - b).norm();
    if residual > CONSISTENCY_TOL * b.norm().max(1.0) {
        return Err(Error::Inconsistent { residual });
    }
    Ok(AffineProjection { a: m, b: b.clone(), pinv })
}

impl AffineProjection {
    pub fn project(&self, v: &Vector) -> Vector {
        v - &self.pinv * (&self.a * v - &self.b)
    }
}

impl ResolventOperator for AffineProjection {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn resolvent(&self, _gamma: f64, v: &Vector) -> Vector {
        self.project(v)
    }
}

/// `h(x) = ½ ||Bx - c||^2` with gradient `B^T (Bx - c)`.
#[derive(Debug, Clone)]
pub struct QuadraticTerm {
    b: DenseMap,
    c: Vector,
    beta: f64,
}

pub fn quadratic_term(b: DenseMap, c: Vector) -> Result<QuadraticTerm> {
    check_dim(b.out_dim(), c.len())?;
    let norm = operator_norm(&b, DEFAULT_NORM_TOL, DEFAULT_NORM_MAX_ITER).value;
    let beta = if norm > 0.0 { BETA_SHRINK / (norm * norm) } else { f64::INFINITY };
    Ok(QuadraticTerm { b, c, beta })
}

impl QuadraticTerm {
    pub fn matrix(&self) -> &DenseMap {
        &self.b
    }

    pub fn offset(&self) -> &Vector {
        &self.c
    }
}

impl SmoothTerm for QuadraticTerm {
    fn dim(&self) -> usize {
        self.b.in_dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * (self.b.apply(x) - &self.c).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.b.adjoint_apply(&(self.b.apply(x) - &self.c))
    }

    fn beta(&self) -> f64 {
        self.beta
    }
}

/// `h = 0`.
#[derive(Debug, Clone)]
pub struct ZeroSmooth {
    dim: usize,
}

impl ZeroSmooth {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl SmoothTerm for ZeroSmooth {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn gradient(&self, _x: &Vector) -> Vector {
        Vector::zeros(self.dim)
    }

    fn beta(&self) -> f64 {
        f64::INFINITY
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// The gradient of a smooth term viewed as a cocoercive map (Baillon-Haddad).
#[derive(Clone)]
pub struct GradientMap(pub Arc<dyn SmoothTerm>);

impl CocoerciveMap for GradientMap {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, z: &Vector) -> Vector {
        self.0.gradient(z)
    }

    fn beta(&self) -> f64 {
        self.0.beta()
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

/// `C = 0`.
#[derive(Debug, Clone)]
pub struct ZeroMap {
    dim: usize,
}

impl ZeroMap {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl CocoerciveMap for ZeroMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, _z: &Vector) -> Vector {
        Vector::zeros(self.dim)
    }

    fn beta(&self) -> f64 {
        f64::INFINITY
    }

    fn is_zero(&self) -> bool {
        true
    }
}
