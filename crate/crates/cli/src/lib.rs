//! Scenario runner: a TOML file names a command and its parameters; a run
//! writes a report plus delimited surface data.
//!
//! Exit codes: 0 success, 2 usage or schema error, 3 invalid parameters or
//! a precondition violated inside a check, 4 numerical failure.

pub mod commands;
pub mod config;
pub mod families;
pub mod report;

use std::path::Path;
use std::time::Instant;

use serde_json::json;

pub use config::{Command, Params, Scenario};
pub use report::{Format, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid parameters: {0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] bitempo_core::Error),
    #[error("cannot write output: {0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use bitempo_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 3,
            CliError::Domain(E::NoConvergence { .. } | E::NonFinite { .. }) | CliError::Internal(_) => 4,
            CliError::Domain(_) => 3,
        }
    }
}

/// Schema and parameter diagnostics without running anything.
pub fn validate(config: &Path) -> Result<Command, Vec<String>> {
    let scenario = Scenario::load(config).map_err(|e| vec![e.to_string()])?;
    let params = scenario.params().map_err(|e| vec![e.to_string()])?;
    let diags = params.diagnostics();
    if diags.is_empty() {
        Ok(scenario.command)
    } else {
        Err(diags)
    }
}

/// Loads `config`, checks it names `expected` (when given), runs it and
/// writes the report and tables into `out`.
pub fn run(expected: Option<Command>, config: &Path, out: &Path, format: Format) -> Result<RunReport, CliError> {
    let scenario = Scenario::load(config)?;
    if let Some(cmd) = expected {
        if cmd != scenario.command {
            return Err(CliError::Usage(format!(
                "{} declares command `{}`, but `{cmd}` was invoked",
                config.display(),
                scenario.command
            )));
        }
    }
    let params = scenario.params()?;
    let diags = params.diagnostics();
    if !diags.is_empty() {
        return Err(CliError::Config(diags.join("; ")));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;

    let start = Instant::now();
    let outcome = commands::execute(&params)?;
    let artifacts = outcome
        .tables
        .iter()
        .map(|t| report::write_table(out, &scenario.name, t))
        .collect::<Result<Vec<_>, _>>()?;
    let parameters = serde_json::to_value(&scenario.table).map_err(|e| CliError::Internal(e.to_string()))?;
    let report = RunReport {
        scenario: json!({ "command": scenario.command, "name": scenario.name, "parameters": parameters }),
        results: outcome.results,
        artifacts,
        timing: report::Timing { wall_seconds: start.elapsed().as_secs_f64() },
    };
    report::write_report(out, &scenario.name, format, &report)?;
    Ok(report)
}
