use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Domain,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate interpolation path: {0}")]
    DegeneratePath(String),

    #[error("tracker failed on seed {seed_index}: {reason}")]
    Tracking { seed_index: usize, reason: String },

    #[error("no trajectories above threshold ({0}); try a lower d_th")]
    NoTrajectories(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("trajectory sets differ: {0}")]
    Mismatch(Mismatch),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Format(_) => ErrorKind::Parse,
            Error::Io { .. } | Error::Image(_) => ErrorKind::Io,
            _ => ErrorKind::Domain,
        }
    }
}

/// Ways two trajectory sets can fail to line up for comparison.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Mismatch {
    #[error("{generated} generated vs {reference} reference trajectories")]
    Count { generated: usize, reference: usize },

    #[error("L = {generated} generated vs L = {reference} reference")]
    Length { generated: usize, reference: usize },

    #[error("frame size {generated:?} generated vs {reference:?} reference")]
    Geometry {
        generated: (u32, u32),
        reference: (u32, u32),
    },
}

/// Errors raised while decoding one of the interchange formats.
///
/// Every variant has a stable numeric [`code`](FormatError::code) so that
/// corrupted inputs can be told apart by scripts.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format tag {found:?} (expected {expected:?})")]
    UnsupportedFormat {
        found: String,
        expected: &'static str,
    },

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("invalid geometry in header: {0}")]
    Geometry(String),

    #[error("record {record}: length {found} does not match L = {expected}")]
    LengthMismatch {
        record: usize,
        found: usize,
        expected: usize,
    },

    #[error("record {record}: {reason}")]
    BadRecord { record: usize, reason: String },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("trailing data after payload ({0} bytes)")]
    TrailingData(usize),
}

impl FormatError {
    pub fn code(&self) -> u16 {
        match self {
            FormatError::BadMagic { .. } => 10,
            FormatError::UnsupportedFormat { .. } => 11,
            FormatError::Malformed(_) => 12,
            FormatError::Geometry(_) => 13,
            FormatError::LengthMismatch { .. } => 14,
            FormatError::BadRecord { .. } => 15,
            FormatError::Truncated { .. } => 16,
            FormatError::TrailingData(_) => 17,
        }
    }
}
