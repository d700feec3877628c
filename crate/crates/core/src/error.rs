use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} samples, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("payload of {bytes} bytes exceeds the {max} byte frame limit")]
    PayloadTooLarge { bytes: usize, max: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("extraction error: {0}")]
    Extraction(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("repetition plan infeasible: per-copy BER {0} is not below 0.5")]
    Infeasible(f64),

    #[error("reconstruction error: {0}")]
    Reconstruction(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("quantization error: {0}")]
    Scale(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
