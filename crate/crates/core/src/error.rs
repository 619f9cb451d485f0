use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by front-ends to pick exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("exposure bracket has no frames")]
    EmptyBracket,

    #[error("no valid pixels inside the fisheye disk")]
    NoValidPixels,

    #[error("unusable exposure: mean disk luminance is {0}")]
    UnusableExposure(f64),

    #[error("no kitchen wall: no wall exceeds the mask coverage threshold")]
    NoKitchenWall,

    #[error("kitchen walls are not contiguous: {0:?}")]
    NonContiguousKitchenWalls(Vec<usize>),

    #[error("unsupported kitchen layout with {0} walls (expected 1 to 3)")]
    UnsupportedWallCount(usize),

    #[error("component sequence is empty")]
    EmptySequence,

    #[error("components overflow the kitchen walls: {0}")]
    PlacementOverflow(String),

    #[error("required width scale {scale} outside clamp [{min}, {max}]")]
    ScaleOutOfRange { scale: f64, min: f64, max: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Format { .. } => ErrorKind::Io,
            Error::Numeric(_) | Error::UnusableExposure(_) | Error::NoValidPixels => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Validation,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
