use thiserror::Error;

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected}, got {got:?}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: Vec<usize>,
    },
    #[error("invalid layer specification: {0}")]
    InvalidSpec(String),
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("non-finite gradient in parameter {param} of layer {layer}")]
    NonFiniteGradient { layer: usize, param: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
