use thiserror::Error;

use crate::geometry::GeometryId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("geometry mismatch: {left} vs {right}")]
    GeometryMismatch { left: GeometryId, right: GeometryId },

    #[error("tangent vector is based at a different point")]
    ForeignTangent,

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sphere radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("operation requires the {required} backend")]
    WrongBackend { required: &'static str },

    #[error("intensity {value} exceeds declared bound {bound} at {location:?}")]
    IntensityBoundExceeded {
        value: f64,
        bound: f64,
        location: Vec<f64>,
    },

    #[error("density unavailable: {0}")]
    DensityUnavailable(String),

    #[error("no closed form: {0}")]
    NoClosedForm(String),

    #[error("not enough samples: need at least {needed}, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step {dt} violates the stability bound {bound}")]
    StabilityBound { dt: f64, bound: f64 },

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
