use std::path::PathBuf;

use omnimotion_core::ErrorKind;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] omnimotion_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => ErrorKind::Domain,
            CliError::Parse { .. } => ErrorKind::Parse,
            CliError::Io { .. } => ErrorKind::Io,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if let CliError::Usage(_) = self {
            return EXIT_USAGE;
        }
        match self.kind() {
            ErrorKind::Parse => EXIT_PARSE,
            ErrorKind::Domain => EXIT_DOMAIN,
            ErrorKind::Io => EXIT_IO,
        }
    }
}

impl From<image::ImageError> for CliError {
    fn from(e: image::ImageError) -> Self {
        CliError::Core(e.into())
    }
}
