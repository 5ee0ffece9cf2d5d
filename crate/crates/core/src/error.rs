use thinnav_nn::NnError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resolution mismatch: expected {expected:?}, got {got:?}")]
    Resolution { expected: (usize, usize), got: (usize, usize) },
    #[error("format: {0}")]
    Format(String),
    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Nn(_) => "nn",
            Error::Io(_) => "io",
            Error::InvalidInput(_) => "invalid_input",
            Error::Resolution { .. } => "resolution_mismatch",
            Error::Format(_) => "format",
            Error::Crc { .. } => "crc_mismatch",
            Error::NotFound(_) => "not_found",
            Error::Diverged { .. } => "diverged",
            Error::Config(_) => "config",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
