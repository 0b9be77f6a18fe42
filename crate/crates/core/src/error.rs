use thiserror::Error;

/// Errors produced by the integrators, the stability tools and the
/// experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("divergence detected at t = {t}")]
    Divergence { t: f64 },

    #[error("implicit solve singular (entry {index})")]
    ImplicitSolveSingular { index: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("reference failure: {0}")]
    Reference(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
