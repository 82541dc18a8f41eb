use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters that cannot be turned into a valid discretization.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("operation `{op}` is not supported for {kernel} kernels")]
    Unsupported { op: &'static str, kernel: &'static str },

    /// Quadrature or series evaluation failed to reach its tolerance.
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            detail: detail.into(),
        }
    }
}
