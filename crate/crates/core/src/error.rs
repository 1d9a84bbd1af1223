use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The array description violates a geometry invariant.
    #[error("invalid geometry: {0}")]
    Geometry(String),
    /// Codebook parameters cannot produce a valid sampling grid.
    #[error("invalid codebook parameters: {0}")]
    Codebook(String),
    /// Vector lengths do not agree with the array size.
    #[error("dimension mismatch: expected {expected} elements, got {got}")]
    Dimension { expected: usize, got: usize },
    /// A serialized document could not be read back.
    #[error("malformed document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
