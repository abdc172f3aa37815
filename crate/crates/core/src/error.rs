use std::path::PathBuf;

use thiserror::Error;

/// `(height, width, channels)` of a grid, used in error reports.
pub type Shape = (usize, usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Shape,
        found: Shape,
    },

    #[error("invalid grid dimensions {height}x{width}x{channels}")]
    InvalidDimensions {
        height: usize,
        width: usize,
        channels: usize,
    },

    #[error("grid data length {len} does not match {height}x{width}x{channels}")]
    DataLength {
        len: usize,
        height: usize,
        width: usize,
        channels: usize,
    },

    #[error("{context} needs at least 2x2 pixels, got {height}x{width}")]
    DimensionTooSmall {
        context: &'static str,
        height: usize,
        width: usize,
    },

    #[error("time {0} is outside [0, 1]")]
    TimeOutOfRange(f32),

    #[error("channel mismatch in {context}: expected {expected}, found {found}")]
    ChannelMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid upsampler weights at layer {layer}: {reason}")]
    InvalidWeights { layer: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("unsupported image format for {0}")]
    UnsupportedFormat(PathBuf),

    #[error("missing or invalid parameter: {0}")]
    Params(String),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
