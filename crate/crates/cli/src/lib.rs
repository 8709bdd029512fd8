//! `psnci` command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or parse error,
//! 3 numerical failure.

// `!(x > y)` comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
mod commands;
pub mod output;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;

use args::Cli;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
    /// Validation ran and at least one check failed.
    ValidationFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ValidationFailed => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::ValidationFailed => write!(f, "validation failed"),
        }
    }
}

impl From<psnci_core::Error> for CliError {
    fn from(e: psnci_core::Error) -> Self {
        use psnci_core::Error as E;
        match e {
            E::Domain(_)
            | E::Invalid(_)
            | E::Unsupported(_)
            | E::ShapeMismatch { .. }
            | E::DegenerateState { .. } => CliError::Usage(e.to_string()),
            E::Numerical { .. }
            | E::DegenerateIndicator(_)
            | E::SupportCoverage { .. }
            | E::NonFinite { .. }
            | E::ResourceLimit { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parse `args` and run the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
        {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            if !matches!(e, CliError::ValidationFailed) {
                eprintln!("{e}");
            }
            e.exit_code()
        }
    }
}
