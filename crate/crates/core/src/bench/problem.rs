//! Random instances of `min ||x||_1 + ½||Bx - c||²` s.t. `Ax = b`.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{DenseMap, Vector};
use crate::operators::{quadratic_term, L1Norm};
use crate::primal_dual::PdProblem;

/// Name of the sampling scheme; part of every problem hash.
pub const GENERATOR: &str = "chacha8-standard-normal-pinv-v1";

/// Where a problem comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    Generated { m: usize, p: usize, n: usize, seed: u64 },
    File { path: PathBuf },
}

/// Dense data of an instance, also the on-disk problem file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemData {
    /// `A`, row-major `m x n`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    /// `B`, row-major `p x n`.
    pub b_matrix: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

/// A problem together with its content hash.
#[derive(Clone)]
pub struct GeneratedProblem {
    pub problem: PdProblem,
    pub hash: String,
    pub data: ProblemData,
}

/// Samples `A`, `B`, `c` and `g` with i.i.d. standard normal entries in that order
/// (matrices row by row), takes the feasible point `x_f = A⁺g` and sets `b = A x_f`.
///
/// `b` is feasible by construction and, when `A` has full row rank, equals `g` up to
/// rounding, so it keeps the standard normal distribution. Sampling `x_f` itself
/// would inflate `b` by a factor of about `√n`.
pub fn generate_problem(m: usize, p: usize, n: usize, seed: u64) -> Result<GeneratedProblem> {
    if m == 0 || p == 0 || n == 0 {
        return Err(Error::Config(format!("dimensions must be positive: (m, p, n) = ({m}, {p}, {n})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let a = DMatrix::from_row_slice(m, n, &sample(m * n));
    let bm = DMatrix::from_row_slice(p, n, &sample(p * n));
    let c = Vector::from_vec(sample(p));
    let g = Vector::from_vec(sample(m));
    let x_feas = a
        .clone()
        .svd(true, true)
        .solve(&g, PSEUDO_INVERSE_TOL * a.norm())
        .map_err(|e| Error::Config(format!("feasible point: {e}")))?;
    let b = &a * x_feas;
    build(a, b, bm, c)
}

/// Relative cutoff for singular values in the pseudo-inverse.
const PSEUDO_INVERSE_TOL: f64 = 1e-12;

/// Loads a problem from a JSON file in the [`ProblemData`] format.
pub fn load_problem(path: &std::path::Path) -> Result<GeneratedProblem> {
    let data: ProblemData = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    let to_matrix = |rows: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::Config(format!("{name} must be a nonempty rectangular matrix")));
        }
        Ok(DMatrix::from_row_slice(r, c, &rows.concat()))
    };
    let a = to_matrix(&data.a, "a")?;
    let bm = to_matrix(&data.b_matrix, "b_matrix")?;
    build(a, Vector::from_vec(data.b), bm, Vector::from_vec(data.c))
}

impl ProblemSource {
    pub fn load(&self) -> Result<GeneratedProblem> {
        match self {
            ProblemSource::Generated { m, p, n, seed } => generate_problem(*m, *p, *n, *seed),
            ProblemSource::File { path } => load_problem(path),
        }
    }
}

fn build(a: DMatrix<f64>, b: Vector, bm: DMatrix<f64>, c: Vector) -> Result<GeneratedProblem> {
    let hash = content_hash(&a, &b, &bm, &c);
    let n = a.ncols();
    if bm.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: bm.ncols() });
    }
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> { (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect() };
    let data = ProblemData {
        a: rows(&a),
        b: b.iter().copied().collect(),
        b_matrix: rows(&bm),
        c: c.iter().copied().collect(),
    };
    let h = quadratic_term(DenseMap::new(bm), c)?;
    let problem = PdProblem::new(Arc::new(L1Norm::new(n)), Arc::new(h), DenseMap::new(a), b)?;
    Ok(GeneratedProblem { problem, hash, data })
}

fn content_hash(a: &DMatrix<f64>, b: &Vector, bm: &DMatrix<f64>, c: &Vector) -> String {
    let mut hasher = Sha256::new();
    hasher.update(GENERATOR.as_bytes());
    for (rows, cols) in [(a.nrows(), a.ncols()), (bm.nrows(), bm.ncols())] {
        hasher.update((rows as u64).to_le_bytes());
        hasher.update((cols as u64).to_le_bytes());
    }
    for x in a.iter().chain(b.iter()).chain(bm.iter()).chain(c.iter()) {
        hasher.update(x.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}
