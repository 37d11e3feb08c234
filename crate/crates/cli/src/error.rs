//! CLI error type with fixed exit codes: 0 success, 2 input validation,
//! 3 non-convergence, 4 simulation cell failure.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad inputs: unreadable files, malformed CSV/JSON, shape or header
    /// mismatches, invalid flag combinations.
    Input(String),
    /// The solver hit its iteration cap and --allow-nonconverged was not
    /// given.
    Convergence(String),
    /// One or more simulation cells aborted.
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Simulation(_) => 4,
        }
    }

    pub fn input(message: impl Into<String>) -> CliError {
        CliError::Input(message.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Convergence(m) => write!(f, "convergence error: {m}"),
            CliError::Simulation(m) => write!(f, "simulation error: {m}"),
        }
    }
}

impl From<mmm_core::Error> for CliError {
    fn from(e: mmm_core::Error) -> Self {
        if e.nonconverged_report().is_some() {
            CliError::Convergence(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
