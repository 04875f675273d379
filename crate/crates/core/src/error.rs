use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// The leading principal minor of order `minor` (1-based) is not positive.
    #[error("matrix is not positive definite: leading minor of order {minor} is non-positive")]
    NotPositiveDefinite { minor: usize },

    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant audit failed: {0}")]
    Audit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, actual: impl ToString) -> Error {
    Error::Dimension {
        context,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
