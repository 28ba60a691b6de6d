use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("index {index} out of range for {len} grid points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("vector is not a grid point: {0}")]
    NotAGridPoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("covariance must be symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error(
        "reward {value} at state {state}, action {action} outside declared range [{min}, {max}]"
    )]
    RewardOutOfRange {
        state: usize,
        action: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("leapfrog trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("empty observation set")]
    EmptyObservations,

    #[error("duplicate observation at ({row}, {col})")]
    DuplicateObservation { row: usize, col: usize },

    #[error("singular measurement covariance")]
    SingularMeasurementCovariance,

    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),

    #[error("malformed q-table: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
