use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The cached inverse produced a negative quadratic form even after a
    /// fresh factorization of the covariance.
    #[error("numerical corruption: {0}")]
    NumericalCorruption(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A runtime invariant that the algorithms guarantee was observed to fail.
    #[error("invariant breach: {0}")]
    InvariantBreach(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
