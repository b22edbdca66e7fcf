use std::path::PathBuf;

/// Errors produced by the toolkit.
///
/// The variants split along the CLI exit-code boundary: [`Error::Parameter`]
/// maps to a usage failure, everything else to a runtime failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("optimization diverged at iteration {iteration}: loss is {value}")]
    Divergence { iteration: usize, value: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 for parameter errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
