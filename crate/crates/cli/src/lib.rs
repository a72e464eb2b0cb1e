//! Config-driven experiment runner: sweeps with CSV output, theorem checks,
//! the ten-class experiment and SVG line plots.

pub mod config;
pub mod csvio;
pub mod mnist;
pub mod plot;
pub mod runner;
pub mod verify;

/// Failures, by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit code 2: the config, flags or inputs are unusable.
    #[error("{0}")]
    Config(String),
    /// Exit code 1: a run or an output step failed.
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Run(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
