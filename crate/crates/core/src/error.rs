use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller supplied arguments outside an operation's domain.
    #[error("usage error: {0}")]
    Usage(String),

    /// A computation produced non-finite or exploding values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A drift vanished where a jump kernel needs to divide by it.
    #[error("singular drift: {0}")]
    Singularity(String),

    /// The transient block of a level chain cannot be inverted.
    #[error("singular transient block: {0}")]
    SingularTransient(String),

    /// A model failed structural validation.
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
