use thiserror::Error;

/// Errors raised by the tree learners and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid generating process: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset is empty")]
    EmptyData,
    #[error("treatment arm `{0}` has no samples")]
    EmptyArm(&'static str),
    #[error("tree has {0} leaves; exhaustive enumeration is limited to {1}")]
    TooManyLeaves(usize, usize),
    #[error("malformed tree text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
