use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Malformed law specification or experiment config.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// The QL iteration failed to converge for some eigenvalue.
    #[error("eigensolver did not converge (eigenvalue index {index}, {iterations} iterations)")]
    EigensolverNoConvergence { index: usize, iterations: usize },

    /// A computed eigenpair failed its residual certificate.
    #[error("eigenvalue residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    /// Two algebraic routes to the same quantity disagree.
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    /// The fixed-point iteration for the bulk-density equations diverged.
    #[error("fixed-point iteration diverged after {iterations} iterations (sup-norm change {change:e})")]
    IterationDiverged { iterations: usize, change: f64 },

    #[error("too many replica failures: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
