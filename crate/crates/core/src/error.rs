use thiserror::Error;

/// Errors raised by the solvers, diagnostics and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A parameter violates an admissibility condition; the message names the
    /// inequality that failed.
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter is outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite value appeared at iteration `k`. The solver state passed to
    /// the failing step is left untouched and still holds the last finite iterate.
    #[error("iteration diverged at k = {k}")]
    Diverged { k: usize },

    #[error("inconsistent linear system: residual {residual:e}")]
    Inconsistent { residual: f64 },

    #[error("not enough usable records for a rate fit: {found} < {required}")]
    InsufficientData { found: usize, required: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the command-line interface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
