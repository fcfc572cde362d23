use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical scheme failed to converge or produced a non-finite value.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A model or layer specification violates its construction invariants.
    #[error("invalid specification: {0}")]
    Spec(String),
    /// A configured resource cap was hit before a path was accepted.
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}

pub(crate) fn spec(msg: impl Into<String>) -> Error {
    Error::Spec(msg.into())
}

pub(crate) fn resource_cap(msg: impl Into<String>) -> Error {
    Error::ResourceCap(msg.into())
}
