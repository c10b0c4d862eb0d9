use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A NaN or infinite value reached an operation that requires finite input.
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    /// A numerical routine could not reach its requested tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
