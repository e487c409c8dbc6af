use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Total stream capacity cannot host every user.
    #[error("infeasible capacity: {demand} streams demanded but only {capacity} available (shortfall {shortfall})")]
    InfeasibleCapacity {
        demand: usize,
        capacity: usize,
        shortfall: usize,
    },

    #[error("search space of {size} assignments exceeds the enumeration cap {cap}; use the genetic solver")]
    SearchSpaceTooLarge { size: f64, cap: f64 },

    /// Broken internal invariant (missing cache entry, singular covariance, ...).
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Wraps the error with a context string such as `slot 12, scheme tfa`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
