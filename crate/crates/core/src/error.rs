use thiserror::Error;

/// Errors produced by the invariant machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("non-finite value in block {block}")]
    NonFinite { block: usize },

    #[error("index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("indices must be distinct: {0:?}")]
    RepeatedIndex(Vec<usize>),

    #[error("projective denominator {value:e} below tolerance {tol:e}")]
    DenominatorNearZero { value: f64, tol: f64 },

    #[error("matrix is singular (det = {0:e})")]
    SingularMatrix(f64),

    #[error("matrix has c3 = 0 and cannot be normalized to the c3 = 1 chart")]
    NotNormalizable,

    #[error("configuration is not in general position")]
    NotInGeneralPosition,

    #[error("frame denominator {0:e} is too close to zero")]
    FrameDenominatorNearZero(f64),

    #[error("evaluation failed: {0}")]
    EvaluationFailure(String),

    #[error("value vanishes where a nonzero value is required")]
    ZeroValue,

    #[error("no admissible sample after {0} attempts")]
    SamplingExhausted(usize),

    #[error("point ({x}, {y}) is outside the admissible image interior")]
    OutOfBounds { x: f64, y: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
