use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or adaptive method did not reach its target.
    ///
    /// `estimate` is the best value obtained and `error_bound` the
    /// method's own estimate of its absolute error (or the last term for
    /// series).
    #[error("numeric error: {message} (best estimate {estimate:e}, error bound {error_bound:e})")]
    Numeric {
        message: String,
        estimate: f64,
        error_bound: f64,
    },

    /// A hypothesis of a lemma or theorem is violated by the inputs.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    /// Invalid run configuration (grid, CFL, schema).
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, estimate: f64, error_bound: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            estimate,
            error_bound,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
