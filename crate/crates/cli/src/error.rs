use thiserror::Error;

/// Failures surfaced to the shell. Exit codes: 2 for bad input or flags,
/// 3 for statistical degeneracy after partial output, 1 otherwise.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<swlrt::Error> for CliError {
    fn from(e: swlrt::Error) -> Self {
        match e {
            swlrt::Error::Validation(_) | swlrt::Error::Format(_) | swlrt::Error::Domain(_) => {
                CliError::Input(e.to_string())
            }
            swlrt::Error::Degenerate(_) => CliError::Degenerate(e.to_string()),
            swlrt::Error::Internal(_) => CliError::Other(e.into()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("malformed delimited file: {e}"))
    }
}
