//! Error type shared across the crate.

/// Errors produced by attribution, estimation, fitting and persistence.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The covariance restricted to the conditioning subset is singular (or
    /// nearly so) and the ridge fallback is disabled.
    #[error(
        "covariance submatrix is singular or ill-conditioned \
         (condition estimate {condition:.3e} exceeds cap {cap:.3e}) and ridge fallback is disabled"
    )]
    SingularSubmatrix { condition: f64, cap: f64 },

    /// Exact subset enumeration was requested beyond the configured cap.
    #[error("feature count {n} exceeds the enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance is not positive semi-definite: {0}")]
    NotPsd(String),

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { got: usize, required: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },

    /// An iterative fit ran out of iterations. Elastic-net fits report this
    /// through a flag on the returned model instead; logistic fits and CLI
    /// escalations surface it as this error.
    #[error("did not converge after {iterations} iterations (last change {last_change:.3e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("labels are linearly separable; the logistic fit requires a positive penalty")]
    SeparableData,

    #[error("covariance factorization failed even after adding jitter")]
    FactorizationFailed,

    #[error("parse error at row {row}, column {col}: {message}")]
    ParseError { row: usize, col: usize, message: String },

    #[error("no data rows in {0}")]
    EmptyFile(String),

    #[error("unsupported tensor format version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("tensor fingerprint does not match the provided distribution")]
    FingerprintMismatch,

    #[error("tensor file truncated: expected {expected} payload bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
