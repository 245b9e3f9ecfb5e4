use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at {location}: {reason}")]
    Validation { location: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("nonpositive mean: E[X] = {mean}; the monotone Sharpe ratio formula needs E[X] > 0")]
    NonpositiveMean { mean: f64 },

    #[error("no downside: X >= 0 on every atom")]
    NoDownside,

    #[error("market is not viable: no strictly positive martingale density exists")]
    NotViable,

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),

    #[error("random market generation failed after {0} attempts")]
    GenerationFailure(usize),

    #[error("inconsistent equivalence battery: {0}")]
    InconsistentEquivalence(String),

    #[error("certificate invalid: {0}")]
    CertificateInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
