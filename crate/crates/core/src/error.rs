use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed audio file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("size mismatch: {0}")]
    Size(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad data: {0}")]
    Data(String),

    #[error("scene sampling failed after {attempts} attempts")]
    Sampling { attempts: usize },

    #[error("training diverged at step {step}: {detail}")]
    Training { step: u64, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Unsupported(_) => 1,
            Error::Numeric(_) | Error::Training { .. } => 3,
            _ => 2,
        }
    }
}
