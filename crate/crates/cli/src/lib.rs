//! Command-line front end: `simulate`, `fit`, `test`, `mc` and `network`.

mod commands;
pub mod config;

use std::ffi::OsString;

use clap::{CommandFactory, Parser};

pub use config::{Command, Horizons, MethodList, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
}

impl From<hdgc_core::Error> for CliError {
    fn from(e: hdgc_core::Error) -> Self {
        Self::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Domain(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Domain(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Domain(e.to_string())
    }
}

pub fn command() -> clap::Command {
    RunConfig::command()
}

/// Parses arguments and merges the config file, if any, under them.
pub fn parse_args<I, T>(args: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    RunConfig::try_parse_from(args)
}

pub fn resolve(cli: RunConfig) -> Result<RunConfig, CliError> {
    let Some(path) = cli.config.clone() else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut merged = cli.merge_under(&text).map_err(CliError::Usage)?;
    merged.config = None;
    Ok(merged)
}

fn init_logging(level: Option<&str>) {
    let _ = env_logger::Builder::new()
        .parse_filters(level.unwrap_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    init_logging(cfg.log_level.as_deref());
    match commands::dispatch(&cfg.command) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DOMAIN
        }
    }
}
