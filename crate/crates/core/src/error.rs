use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Model notation could not be parsed. `pos` is a byte offset into the input.
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("shape error in layer {layer}: {msg}")]
    Shape { layer: String, msg: String },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// Malformed file contents (WAV, weights container, model file, config).
    #[error("format error: {0}")]
    Format(String),

    #[error("quantization error: {0}")]
    Quant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(pos: usize, msg: impl Into<String>) -> Self {
        Error::Parse { pos, msg: msg.into() }
    }

    pub(crate) fn shape(layer: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Shape { layer: layer.into(), msg: msg.into() }
    }

    /// True for errors caused by malformed input files or notation.
    pub fn is_input_format(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::Parse { .. }
                | Error::LengthMismatch { .. }
                | Error::Shape { .. }
                | Error::DimMismatch(_)
                | Error::InvalidInput(_)
        )
    }
}
