use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation (non-finite entries, a vector
    /// that is not tangent, singular values out of range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A decomposition or the optimizer failed to produce a finite answer.
    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_shape(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Shape(msg()))
    }
}
