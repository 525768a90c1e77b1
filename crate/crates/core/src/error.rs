//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Conformability or shape violation in user-supplied data.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix that must be positive (semi)definite is not.
    #[error("not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Model or distortion specification rejected during validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// `<X,Z>` has already dropped to the weighted-block floor; the extended
    /// normalized duality gap is undefined and the caller must treat the
    /// iterate as converged.
    #[error("duality gap already closed")]
    GapClosed,

    /// No strictly feasible point could be produced.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A factorization or Newton system broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Model file or schedule/design document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A schedule or design is internally inconsistent (e.g. filtered
    /// covariance above the prediction covariance beyond tolerance).
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
