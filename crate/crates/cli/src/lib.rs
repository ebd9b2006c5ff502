//! Batch front end: TOML run configuration in, one JSON report out.

pub mod commands;
pub mod config;

use nctransport::rmt::RmtError;
use nctransport::solver::SolverError;
use thiserror::Error;

pub use commands::{run, Outcome};
pub use config::{Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    /// A computation ran but a certified check failed.
    #[error("{0}")]
    Check(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig(_) | SolverError::InvalidPotential(_) | SolverError::Algebra(_) => {
                CliError::Config(e.to_string())
            }
            SolverError::ConditionsFailed(_) | SolverError::Divergence { .. } | SolverError::NonConvergence { .. } => {
                CliError::Check(e.to_string())
            }
        }
    }
}

impl From<RmtError> for CliError {
    fn from(e: RmtError) -> Self {
        match e {
            RmtError::Solver(s) => s.into(),
            RmtError::InvalidConfig(_) => CliError::Config(e.to_string()),
            RmtError::SpectralRadius { .. } => CliError::Check(e.to_string()),
        }
    }
}

/// Writes the report (pretty JSON, trailing newline) to `out` or stdout,
/// and the CSV side-file when there is somewhere to put it.
pub fn write_outputs(cfg: &RunConfig, outcome: &Outcome) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| CliError::Config(format!("serializing report: {e}")))?;
    text.push('\n');
    match &cfg.out {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(csv) = &outcome.csv {
        let target = cfg.onevar.csv.clone().or_else(|| cfg.out.as_ref().map(|p| p.with_extension("csv")));
        if let Some(path) = target {
            std::fs::write(path, csv)?;
        }
    }
    Ok(())
}
