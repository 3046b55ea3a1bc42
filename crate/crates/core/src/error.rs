use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{routine} did not converge after {iterations} iterations ({detail})")]
    NonConvergence {
        routine: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("matrix is not symmetric: max |a_ij - a_ji| = {asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is singular to working tolerance at column {column} (pivot magnitude {magnitude:e})")]
    Singular { column: usize, magnitude: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown system '{name}'; available: {}", available.join(", "))]
    UnknownSystem {
        name: String,
        available: Vec<String>,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solve failed at parameter {mu:?}: {source}")]
    SolveFailed {
        mu: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
