use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value lies outside the domain of the function (NaN, infinity).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A matrix decomposition failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The solver produced a non-finite objective.
    #[error("solver diverged after {iterations} iterations: {reason}")]
    Diverged { iterations: usize, reason: String },

    /// Rejection sampling could not produce an admissible direction.
    #[error("sampling failure: {0}")]
    Sampling(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Short machine-readable tag used in result rows.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::Numeric(_) => "numeric",
            Error::Diverged { .. } => "diverged",
            Error::Sampling(_) => "sampling",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
        }
    }
}
