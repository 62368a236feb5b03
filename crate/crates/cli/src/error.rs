use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { message: String, line: Option<usize> },

    #[error("simulation failed: {0}")]
    Simulation(crossreg::Error),

    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config { message: message.into(), line: None }
    }

    /// Process exit status. 2 is left to argument parsing errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 3,
            CliError::Simulation(_) => 4,
            CliError::Io { .. } => 5,
        }
    }
}

impl From<crossreg::Error> for CliError {
    fn from(e: crossreg::Error) -> Self {
        match e {
            crossreg::Error::Divergence { .. } => CliError::Simulation(e),
            other => CliError::config(other.to_string()),
        }
    }
}
