use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Domain(_)
            | Error::OutOfRange(_)
            | Error::Infeasible(_)
            | Error::Parse(_) => 2,
            Error::Numeric(_) | Error::NoRoot(_) => 3,
            Error::Io { .. } => 1,
        }
    }
}
