use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("odd dimensions {width}x{height}: Bayer data needs even width and height")]
    OddDimensions { width: usize, height: usize },

    #[error("expected {expected} channel(s), got {actual}")]
    ChannelCount { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("image {width}x{height} is smaller than the required minimum {min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("sample buffer has length {actual}, expected {expected}")]
    BufferLength { expected: usize, actual: usize },

    #[error("sample at index {index} is {value}, expected a finite value in [0, 1]")]
    SampleOutOfRange { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("empty dataset: no readable images in {0}")]
    EmptyDataset(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
