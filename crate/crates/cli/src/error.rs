use beliefcal::metrics::MetricsError;
use beliefcal::{CalibrateError, DataError};
use thiserror::Error;

/// Failure of a subcommand, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 1: the configuration or the command line is unusable.
    #[error("{0}")]
    Config(String),
    /// Exit 2: the data file is missing or malformed, or outputs cannot be written.
    #[error("{0}")]
    Data(String),
    /// Exit 3: a numerical routine failed.
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Solver(_) => "solver",
        }
    }

    /// `error[<kind>]: <message>` on one line.
    pub fn diagnostic(&self) -> String {
        let msg: String = self
            .to_string()
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!("error[{}]: {msg}", self.kind())
    }

    pub fn io(what: &str, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{what}: {e}"))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidContext(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<CalibrateError> for CliError {
    fn from(e: CalibrateError) -> Self {
        match e {
            CalibrateError::InvalidGrid(_)
            | CalibrateError::UnknownObjective(_)
            | CalibrateError::NoObjectives => CliError::Config(e.to_string()),
            CalibrateError::Metrics(m) => m.into(),
            _ => CliError::Solver(e.to_string()),
        }
    }
}
