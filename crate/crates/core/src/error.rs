use alloc::boxed::Box;
use alloc::string::String;

/// Failure categories shared by every stage of the toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("block {id}: {source}")]
    Block { id: usize, source: Box<Error> },
}

/// Coarse classification of an [`Error`], with block tags peeled off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parameter,
    Shape,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) => ErrorKind::Parameter,
            Error::Shape(_) => ErrorKind::Shape,
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Block { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_block(self, id: usize) -> Error {
        Error::Block { id, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! param_err {
    ($($arg:tt)*) => { $crate::error::Error::Parameter(alloc::format!($($arg)*)) };
}
macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}
pub(crate) use {param_err, shape_err};
