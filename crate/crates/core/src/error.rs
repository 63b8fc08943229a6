use thiserror::Error;

/// Errors raised by the numerical kernels, the simulator and the KPR model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A root finder or other numerical procedure failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A simulation configuration violates one of its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An operation was called on data that does not support it.
    #[error("usage error: {0}")]
    Usage(String),
    /// A state invariant was found broken.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
