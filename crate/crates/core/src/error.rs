use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlsError {
    #[error("incompatible shapes: {0}")]
    ShapeMismatch(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("entry cap exceeded: {entries} entries > cap {cap}")]
    CapExceeded { entries: usize, cap: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("operator is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("operator not PSD on this vector (radicand {0:e})")]
    NotPsdOnVector(f64),

    #[error("objective undefined: ‖b‖ = 0")]
    ZeroTarget,

    #[error("projected operator singular")]
    ProjectedSingular,

    #[error("block index {mu} out of range (format has {blocks} blocks)")]
    BlockOutOfRange { mu: usize, blocks: usize },

    #[error("parameter system does not match format: {0}")]
    ParamMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero tensor has no angle")]
    ZeroAngle,

    #[error("series too short: need {needed} entries, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, AlsError>;

impl From<serde_json::Error> for AlsError {
    fn from(e: serde_json::Error) -> Self {
        AlsError::Serialization(e.to_string())
    }
}
