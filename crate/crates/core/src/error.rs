use thiserror::Error;

pub type Result<T> = std::result::Result<T, PinError>;

#[derive(Debug, Error)]
pub enum PinError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("cannot partition {features} frequencies into {levels} levels")]
    Partition { features: usize, levels: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at step {step}: {reason}")]
    Training { step: u64, reason: String },

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PinError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        PinError::Parameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        PinError::Shape(msg.into())
    }
}
