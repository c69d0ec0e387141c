use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Config keys are individually valid but jointly inconsistent
    /// (e.g. random reshuffling on a problem without a finite sum).
    #[error("incompatible configuration: {0}")]
    IncompatibleConfig(String),

    /// Unknown catalog or enum name.
    #[error("unknown name: {0}")]
    UnknownName(String),

    /// A vector or scalar that must be finite is not.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// An inner solver ran out of iterations; carries the last residual.
    #[error("inner solver did not converge after {iters} iterations (residual {residual:e})")]
    InnerSolverFailed { iters: usize, residual: f64 },

    /// A verifier condition cannot be evaluated on this ensemble.
    #[error("condition not applicable: {0}")]
    NotApplicable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
