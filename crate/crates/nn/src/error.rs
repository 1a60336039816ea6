use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("channel mismatch: layer expects {expected} input channels, got {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: [usize; 3],
        found: [usize; 3],
    },
    #[error("invalid dimensions {0:?}: every dimension must be positive")]
    InvalidDims([usize; 3]),
    #[error("storage length {len} does not match dimensions {dims:?}")]
    StorageLength { dims: [usize; 3], len: usize },
    #[error("time axis too short: {0}")]
    TooShort(usize),
    #[error("invalid layer configuration: {0}")]
    InvalidLayer(String),
    #[error("backward called without a cached forward pass")]
    MissingCache,
    #[error("parameter count mismatch: expected {expected}, got {found}")]
    ParamMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, NnError>;
