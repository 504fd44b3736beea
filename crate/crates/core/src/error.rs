use thiserror::Error;

use crate::kernels::Regime;

/// Everything that can go wrong inside the numerical modules and the run harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not reach tolerance {tol:e} (last error estimate {estimate:e}) while computing {what}")]
    NonConvergent {
        what: String,
        tol: f64,
        estimate: f64,
    },

    #[error("same-path Hamiltonian diverges in regime {0:?}; pass an explicit override for diagnostics")]
    DivergentDiagonal(Regime),

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("expected Hamiltonian is infinite in regime {0:?} (needs alpha*beta0 + beta < alpha)")]
    NotIntegrable(Regime),

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("test function violates Hermitian symmetry (max defect {0:e})")]
    AsymmetricInput(f64),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("slice {slice} has squared norm {norm}, expected 1")]
    NotNormalized { slice: usize, norm: f64 },

    #[error("variational estimate {value} exceeded ceiling {ceiling}")]
    Diverged { value: f64, ceiling: f64 },

    #[error("invalid config at `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("regime mismatch: {pipeline} requires {required}, spec is {actual:?}")]
    RegimeMismatch {
        pipeline: String,
        required: String,
        actual: Regime,
    },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("run directory has no {0} records")]
    MissingRecords(String),

    #[error("hash mismatch for {0}")]
    HashMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 1 for numerical or I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid { .. } | Error::RegimeMismatch { .. } | Error::Json(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
