use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("training diverged at iteration {iteration}: loss is not finite")]
    TrainingDiverged { iteration: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("split {index}: {source}")]
    Split {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Broad failure classes, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numerical => 3,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ErrorClass::Usage => "E_USAGE",
            ErrorClass::Data => "E_DATA",
            ErrorClass::Numerical => "E_NUMERIC",
        }
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Usage,
            Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Data(_)
            | Error::Protocol(_)
            | Error::Io(_) => ErrorClass::Data,
            Error::DegenerateData(_) | Error::TrainingDiverged { .. } => ErrorClass::Numerical,
            Error::Split { source, .. } => source.class(),
        }
    }

    /// Attach a split index to an error coming out of a per-split run.
    pub fn in_split(self, index: usize) -> Self {
        Error::Split {
            index,
            source: Box::new(self),
        }
    }
}
