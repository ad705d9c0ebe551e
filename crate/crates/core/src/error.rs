use thiserror::Error;

/// Errors produced by the tensor-network control toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller supplied arguments that violate a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A numerical kernel failed (nonconvergence, non-finite values).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Prefixes the message with `ctx`, keeping the error kind.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{ctx}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::InvalidInput(format!($($arg)*)) };
}

macro_rules! numerical {
    ($($arg:tt)*) => { $crate::error::Error::Numerical(format!($($arg)*)) };
}

pub(crate) use invalid;
pub(crate) use numerical;
