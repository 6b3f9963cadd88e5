use thiserror::Error;

/// Everything that can go wrong in the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An intermediate quantity would overflow `f64`.
    #[error("range error: {0}")]
    Range(String),

    /// Matrix or vector shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A basis index is larger than the representation allows.
    #[error("index {index} out of range (maximum {max})")]
    IndexOutOfRange { index: usize, max: usize },

    /// Step refinement in a time integration failed to reach the requested
    /// tolerance.
    #[error("integration did not converge: tolerance {tol:e}, achieved {achieved:e}")]
    Tolerance { tol: f64, achieved: f64 },

    /// Malformed run configuration.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
