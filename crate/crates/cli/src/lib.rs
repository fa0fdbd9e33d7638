//! `mfg-lab`: scenario files in, CSV/SVG curves and a summary out.
//!
//! Exit codes: 0 success, 1 invalid config or invocation, 2 solver failure
//! (blow-up where a global solution is required), 3 oracle disagreement.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(std::io::Error),
    Solver(mfg_core::Error),
    Disagreement(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(mfg_core::Error::InvalidParameter(_)) => 1,
            CliError::Solver(_) => 2,
            CliError::Disagreement(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Disagreement(m) => write!(f, "oracle disagreement: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<mfg_core::Error> for CliError {
    fn from(e: mfg_core::Error) -> Self {
        CliError::Solver(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "mfg-lab", version, about = "Linear-quadratic mean-field game lab")]
pub struct Cli {
    /// Output directory (overrides the config's `out` key; default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a full-line scenario (`kind = gaussian`).
    Gaussian { config: PathBuf },
    /// Solve a half-line scenario (`kind = halfline`).
    Halfline { config: PathBuf },
    /// Drift-opinion scenario (`kind = merton-drift`).
    MertonDrift { config: PathBuf },
    /// Volatility-opinion scenario (`kind = merton-vol`).
    MertonVol { config: PathBuf },
    /// Check the reduction against the PDE and/or Monte-Carlo oracles.
    ///
    /// Without flags the config's `pde`/`mc` toggles decide; if both are
    /// off, both oracles run.
    Verify {
        config: PathBuf,
        #[arg(long)]
        pde: bool,
        #[arg(long)]
        mc: bool,
        /// Also dump the PDE field as `t,x,phi,m`.
        #[arg(long)]
        dump_field: bool,
        /// Also dump this many Monte-Carlo paths as `t,agent_id,x`.
        #[arg(long, value_name = "N")]
        dump_paths: Option<usize>,
    },
    /// Audit the closed forms on a seeded random suite.
    AuditFormulas {
        #[arg(long, default_value_t = commands::AUDIT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        count: usize,
    },
    /// The three bundled drift-opinion curves.
    Figure1 {
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1001)]
        grid_points: usize,
    },
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::run(&cli) {
        Ok(report) => {
            println!("{report}");
            0
        }
        Err(e) => {
            eprintln!("mfg-lab: {e}");
            e.exit_code()
        }
    }
}
