use std::path::PathBuf;

use bsdb_core::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] bsdb_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{0}")]
    Sequence(String),
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const EXIT_PARAMETER: i32 = 2;
pub const EXIT_SHAPE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) => match e.kind() {
                ErrorKind::Parameter => EXIT_PARAMETER,
                ErrorKind::Shape => EXIT_SHAPE,
                ErrorKind::Numeric => EXIT_NUMERIC,
            },
            Error::Config { .. } => EXIT_PARAMETER,
            Error::Io { .. } | Error::Image { .. } | Error::Sequence(_) => EXIT_IO,
        }
    }
}
