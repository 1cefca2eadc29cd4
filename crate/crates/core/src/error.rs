use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("algebra mismatch: expected {expected}, found {found}")]
    AlgebraMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("unknown activation `{0}` (expected tanh, sigmoid, identity or relu)")]
    UnknownActivation(String),

    #[error("unknown loss `{0}` (expected mse or nll)")]
    UnknownLoss(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequence is empty")]
    EmptySequence,

    #[error("series too short for delta: need at least {need} frames, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("targets are not probability vectors: {0}")]
    NotProbabilities(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Failures when decoding feature files and checkpoints.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("format version mismatch: file has `{found}`, reader supports `{expected}`")]
    VersionMismatch { found: String, expected: String },
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
