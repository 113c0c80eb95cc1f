use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// The variants are grouped the way the command-line harness maps them to
/// exit codes: malformed input is a [`Error::Config`], a well-formed request
/// whose mathematical precondition fails is one of the remaining variants.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("matrix exponential argument out of supported range (norm {0:.3e})")]
    ExpOutOfRange(f64),

    #[error("spectral gap violated: {0}")]
    SpectralGap(String),

    #[error("not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("unsupported process kind `{kind}` for {operation}")]
    UnsupportedKind { kind: &'static str, operation: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory too short: need {needed} steps, have {have}")]
    TooShort { needed: usize, have: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("truncation tail check failed: {0}")]
    TailCheck(String),

    #[error("flavor mismatch: estimate is {estimate}, oracle is {oracle}")]
    FlavorMismatch { estimate: String, oracle: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
