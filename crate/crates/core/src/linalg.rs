//! Dense vectors, linear maps with adjoints and spectral-norm estimation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Element of the ambient finite-dimensional Hilbert space.
pub type Vector = DVector<f64>;

pub const DEFAULT_NORM_TOL: f64 = 1e-10;
pub const DEFAULT_NORM_MAX_ITER: usize = 10_000;
pub const DEFAULT_NORM_SEED: u64 = 0x5eed;

/// Euclidean inner product with a dimension check.
pub fn inner(u: &Vector, v: &Vector) -> Result<f64> {
    check_dim(u.len(), v.len())?;
    Ok(u.dot(v))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// True when every entry is finite.
pub fn is_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// A bounded linear operator between two Euclidean spaces together with its adjoint.
///
/// Implementations must satisfy `<A u, v> = <u, A^T v>`.
pub trait LinearMap: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn adjoint_apply(&self, y: &Vector) -> Vector;
}

/// Dense matrix operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap {
    matrix: DMatrix<f64>,
}

impl DenseMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Builds an `rows x cols` map from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[f64]) -> Self {
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Gram operator `A^T A` as a dense map.
    pub fn gram(&self) -> DenseMap {
        DenseMap::new(self.matrix.tr_mul(&self.matrix))
    }
}

impl LinearMap for DenseMap {
    fn in_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn out_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &Vector) -> Vector {
        &self.matrix * x
    }

    fn adjoint_apply(&self, y: &Vector) -> Vector {
        self.matrix.tr_mul(y)
    }
}

/// Result of a power-iteration norm estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` was exhausted before the relative change dropped below `tol`;
    /// `value` then holds the last iterate.
    pub converged: bool,
}

/// Largest singular value of `a` by power iteration on `A^T A` from the default seed.
pub fn operator_norm(a: &dyn LinearMap, tol: f64, max_iter: usize) -> NormEstimate {
    operator_norm_seeded(a, tol, max_iter, DEFAULT_NORM_SEED)
}

/// Same as [`operator_norm`] with an explicit seed for the random start vector.
pub fn operator_norm_seeded(a: &dyn LinearMap, tol: f64, max_iter: usize, seed: u64) -> NormEstimate {
    assert!(tol > 0.0, "operator_norm: tol must be positive");
    let n = a.in_dim();
    if n == 0 || a.out_dim() == 0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();

    // Rayleigh quotient ||A v||^2 estimates the top eigenvalue of A^T A.
    let mut sigma_sq = 0.0;
    for it in 1..=max_iter {
        let av = a.apply(&v);
        let rq = av.norm_squared();
        let w = a.adjoint_apply(&av);
        let wn = w.norm();
        if wn == 0.0 || rq == 0.0 {
            return NormEstimate { value: 0.0, iterations: it, converged: true };
        }
        v = w / wn;
        if it > 1 && (rq - sigma_sq).abs() <= tol * rq {
            return NormEstimate { value: rq.sqrt(), iterations: it, converged: true };
        }
        sigma_sq = rq;
    }
    NormEstimate { value: sigma_sq.sqrt(), iterations: max_iter, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn inner_examples() {
        let u = Vector::from_vec(vec![1.0, 2.0]);
        let v = Vector::from_vec(vec![3.0, 4.0]);
        assert_eq!(inner(&u, &v).unwrap(), 11.0);
        assert_eq!(inner(&Vector::zeros(2), &v).unwrap(), 0.0);
        assert!(matches!(
            inner(&u, &Vector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    proptest! {
        #[test]
        fn inner_is_symmetric_and_positive(a in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            let v = Vector::from_vec(a.clone());
            let w = Vector::from_vec(a.iter().rev().cloned().collect());
            prop_assert!(inner(&v, &v).unwrap() >= 0.0);
            prop_assert_eq!(inner(&v, &w).unwrap(), inner(&w, &v).unwrap());
        }
    }

    #[test]
    fn norm_of_diagonal_and_zero_maps() {
        let d = DenseMap::from_diagonal(&[3.0, 1.0]);
        let est = operator_norm(&d, 1e-12, 10_000);
        assert!(est.converged);
        assert!((est.value - 3.0).abs() < 1e-10);

        let z = DenseMap::new(DMatrix::zeros(4, 3));
        assert_eq!(operator_norm(&z, 1e-10, 100).value, 0.0);
    }

    #[test]
    fn norm_matches_svd_oracle() {
        let m = random_matrix(5, 3, 11);
        let oracle = m.clone().svd(false, false).singular_values.max();
        let est = operator_norm(&DenseMap::new(m), DEFAULT_NORM_TOL, DEFAULT_NORM_MAX_ITER);
        assert!(est.converged);
        assert!((est.value - oracle).abs() <= 1e-8 * oracle, "{} vs {}", est.value, oracle);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let m = random_matrix(30, 30, 3);
        let est = operator_norm(&DenseMap::new(m), 1e-15, 2);
        assert!(!est.converged);
        assert!(est.value > 0.0);
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let a = DenseMap::new(random_matrix(7, 4, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let u = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let v = Vector::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
            let lhs = a.apply(&u).dot(&v);
            let rhs = u.dot(&a.adjoint_apply(&v));
            let scale = a.apply(&u).norm() * v.norm() + 1e-300;
            assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn norm_bounds_random_ratios() {
        let a = DenseMap::new(random_matrix(6, 9, 21));
        let tol = DEFAULT_NORM_TOL;
        let est = operator_norm(&a, tol, DEFAULT_NORM_MAX_ITER).value;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = Vector::from_fn(9, |_, _| StandardNormal.sample(&mut rng));
            let ratio = a.apply(&v).norm() / v.norm();
            assert!(est >= ratio - tol * est);
        }
    }
}
