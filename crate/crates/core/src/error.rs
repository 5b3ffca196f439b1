use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure failed its own convergence or consistency check.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A request that is well-formed but not usable (too few trials, bad grid).
    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
