use thiserror::Error;

/// Failures of a command, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or unreadable configuration and input files. Exit status 1.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical kernel failed. Exit status 2.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }
}

impl From<tnqc_core::Error> for CliError {
    fn from(e: tnqc_core::Error) -> Self {
        match e {
            tnqc_core::Error::Numerical(m) => CliError::Numerical(m),
            tnqc_core::Error::InvalidInput(m) => CliError::Config(m),
            other => CliError::Config(other.to_string()),
        }
    }
}
