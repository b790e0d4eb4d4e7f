use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("zero extent")]
    ZeroExtent,
    #[error("rank-deficient covariance")]
    RankDeficientCovariance,
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("sample count {k} out of range 1..={n}")]
    SampleCountOutOfRange { k: usize, n: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("simplex constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("diverged at step {step}")]
    Diverged { step: usize },
    #[error("RBF system singular")]
    RbfSingular,
    #[error("unknown corruption kind `{0}`")]
    UnknownKind(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
