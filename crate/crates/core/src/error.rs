use std::io;

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Non-finite activations or loss; the run has diverged.
    #[error("numeric divergence: {0}")]
    Divergence(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u32),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("image codec: {0}")]
    Codec(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than bad usage or divergence.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. }
                | Error::TruncatedPayload { .. }
                | Error::UnsupportedDtype(_)
                | Error::Format(_)
                | Error::Codec(_)
                | Error::Io(_)
                | Error::DimensionMismatch(_)
                | Error::IndexOutOfRange(_)
        )
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Codec(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
