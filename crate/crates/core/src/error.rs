use thiserror::Error;

/// Errors raised by the linear-algebra layer, the channel model and the optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::matrix::MAX_DIM)]
    DimensionTooLarge(usize),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("{what} decomposition did not converge")]
    NoConvergence { what: &'static str },

    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),

    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),

    #[error(
        "Kraus operators violate trace preservation (defect {defect:e}, tolerance {tolerance:e})"
    )]
    NotTracePreserving { defect: f64, tolerance: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid partial trace request: {0}")]
    InvalidPartialTrace(String),

    #[error("Delta must have unit Frobenius norm (got squared norm {0})")]
    DeltaNorm(f64),

    #[error("invalid Gamma: {0}")]
    InvalidGamma(String),

    #[error("channel schema error: {0}")]
    Schema(String),

    #[error("channel schema error in Kraus operator {index}: expected {expected} entries, found {found}")]
    KrausEntryCount {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(
    context: &'static str,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
