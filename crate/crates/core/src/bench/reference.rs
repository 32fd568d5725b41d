//! High-accuracy reference saddle points, cached on disk by problem hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::primal_dual::{pd_default_steps, PdProblem, PdState};

use super::record::write_atomic;

/// Smallest admissible reference budget.
pub const MIN_REFERENCE_BUDGET: usize = 100_000;
/// Feasibility above which a reference is flagged as not converged.
pub const REFERENCE_FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Directory for cached references; `None` disables caching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

fn default_budget() -> usize {
    1_000_000
}

fn default_alpha() -> f64 {
    10.0
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { budget: default_budget(), alpha: default_alpha(), cache_dir: None }
    }
}

/// Reference saddle point `(x*, λ*)` with `F* = (f + h)(x*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub problem_hash: String,
    pub budget: usize,
    pub alpha: f64,
    pub x_star: Vector,
    pub lam_star: Vector,
    pub f_star: f64,
    pub feasibility: f64,
    /// False when `feasibility > 1e-8`.
    pub converged: bool,
}

impl ReferenceConfig {
    /// Cache file for `hash` under `dir`.
    pub fn cache_path(&self, dir: &Path, hash: &str) -> PathBuf {
        dir.join(format!("reference-{hash}-{}-a{}.json", self.budget, self.alpha))
    }
}

/// Final iterate of a `budget`-iteration primal-dual run with default steps, loaded
/// from the cache when an entry for the same problem hash and settings exists.
///
/// The second return value is true on a cache hit.
pub fn reference_solution(problem: &PdProblem, hash: &str, config: &ReferenceConfig) -> Result<(Reference, bool)> {
    if config.budget < MIN_REFERENCE_BUDGET {
        return Err(Error::Config(format!(
            "reference budget must be at least {MIN_REFERENCE_BUDGET}, got {}",
            config.budget
        )));
    }
    if let Some(dir) = &config.cache_dir {
        let path = config.cache_path(dir, hash);
        if path.exists() {
            let cached: Reference = serde_json::from_slice(&std::fs::read(&path)?)?;
            if cached.problem_hash == hash {
                return Ok((cached, true));
            }
        }
    }
    let params = pd_default_steps(config.alpha, problem)?;
    let mut state = PdState::from_origin(problem, &params)?;
    while state.k < config.budget {
        state.step(problem, &params)?;
    }
    let feasibility = problem.feasibility(&state.x);
    let reference = Reference {
        problem_hash: hash.to_string(),
        budget: config.budget,
        alpha: config.alpha,
        f_star: problem.objective(&state.x),
        x_star: state.x,
        lam_star: state.lam,
        feasibility,
        converged: feasibility <= REFERENCE_FEASIBILITY_TOL,
    };
    if let Some(dir) = &config.cache_dir {
        let mut bytes = serde_json::to_vec(&reference)?;
        bytes.push(b'\n');
        write_atomic(&config.cache_path(dir, hash), &bytes)?;
    }
    Ok((reference, false))
}
