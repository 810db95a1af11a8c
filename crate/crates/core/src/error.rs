use thiserror::Error;

/// Failure modes of the simulation routines.
///
/// The variants map one-to-one onto the CLI exit classes: parameter and
/// geometry problems are validation failures, the rest are numeric failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid extent error: {0}")]
    Extent(String),
    #[error("beams do not split: {0}")]
    NoSplit(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::InvalidGeometry(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
