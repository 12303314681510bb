use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: negative times, bad probabilities, unknown enums.
    #[error("validation error: {0}")]
    Validation(String),
    /// Input is well-formed but outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A statistic cannot be formed because a variance is zero.
    #[error("degenerate: {0}")]
    Degenerate(String),
    /// Broken internal invariant, e.g. weights misaligned with risk rows.
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("scenario file error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
