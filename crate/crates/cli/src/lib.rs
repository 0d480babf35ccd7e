//! Command-line front end and benchmark harness.
//!
//! Every command is a plain function over parsed arguments so the binary,
//! the integration tests and the acceptance suite share one code path.

pub mod args;
pub mod bench;
pub mod commands;

use std::fmt;

pub use args::{Cli, Command};
pub use bench::{run_bench, BenchOutcome, BenchPlan, BenchRow, Seeds};

/// Reconstruction methods reachable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Method {
    #[value(name = "zerofill")]
    ZeroFill,
    Cs,
    Ls,
    Csm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ZeroFill, Method::Cs, Method::Ls, Method::Csm];

    pub fn name(self) -> &'static str {
        match self {
            Method::ZeroFill => "zerofill",
            Method::Cs => "cs",
            Method::Ls => "ls",
            Method::Csm => "csm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown method '{s}' (valid: zerofill, cs, ls, csm)"
                ))
            })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl From<csm::Error> for CliError {
    fn from(e: csm::Error) -> Self {
        match e {
            e if e.is_solver_failure() => CliError::Solver(e.to_string()),
            csm::Error::InvalidArgument(_) | csm::Error::Infeasible(_) => {
                CliError::Usage(e.to_string())
            }
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Parses and runs one invocation, returning the process exit code.
/// Parse failures (including `--help`) are printed by clap.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
