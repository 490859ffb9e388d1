use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Regime(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0} row(s) outside tolerance")]
    VerificationFailed(usize),
}

impl CliError {
    /// 0 ok, 1 verification failure, 2 validation, 3 physical regime,
    /// 4 internal numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Regime(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 4,
        }
    }
}

impl From<cavity_concentration::Error> for CliError {
    fn from(e: cavity_concentration::Error) -> Self {
        use cavity_concentration::Error as E;
        match e {
            E::Overdamped { .. } => CliError::Regime(e.to_string()),
            E::InvalidInput(_) | E::UnmatchedPairs | E::ClickTimeOutOfRange { .. } | E::NegativeTime(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Numerical(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numerical(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
