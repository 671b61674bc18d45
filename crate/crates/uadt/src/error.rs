use std::path::PathBuf;

use uadt_core::trainer::RlError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: field `{field}`: {msg}")]
    Record { path: PathBuf, line: usize, field: String, msg: String },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 1 configuration, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) => 2,
            Self::Io { .. } | Self::Record { .. } | Self::Format { .. } => 3,
        }
    }
}

impl From<uadt_core::Error> for Error {
    fn from(e: uadt_core::Error) -> Self {
        match e {
            uadt_core::Error::Numerical { .. } => Self::Numerical(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<RlError> for Error {
    fn from(e: RlError) -> Self {
        match e {
            RlError::Setup(e) => e.into(),
            RlError::Aborted(f) => Self::Numerical(format!("aborted at step {} on task {}: {}", f.step, f.task_id, f.error)),
        }
    }
}
