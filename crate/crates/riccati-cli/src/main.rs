//! Command-line front end: solve the configured problem directly, run the
//! kernel recipe, benchmark the methods against each other, or run the
//! verification suite. Exit codes are part of the interface:
//!
//!   0 success, 1 check failure, 2 config/input error, 3 finite escape,
//!   4 coercivity loss, 5 unbounded composition/reconstruction.

use std::fmt;
use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use riccati_core::linalg::LinalgError;
use riccati_core::problem::ProblemError;
use riccati_core::riccati::RiccatiError;
use riccati_core::semigroup::SemigroupError;

mod bench;
mod checks;
mod config;
mod formats;
mod recipe;
mod setup;
mod solve;

use config::Config;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or unreadable/malformed input files.
    Config(String),
    /// One or more verification checks failed.
    CheckFailed(String),
    /// The flow escaped in finite time before the requested horizon.
    Escape(String),
    /// The anchor gap lost coercivity during integration.
    Coercivity(String),
    /// A kernel composition or reconstruction was unbounded or numerically
    /// invalid.
    Unbounded(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Escape(_) => 3,
            CliError::Coercivity(_) => 4,
            CliError::Unbounded(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m)
            | CliError::CheckFailed(m)
            | CliError::Escape(m)
            | CliError::Coercivity(m)
            | CliError::Unbounded(m) => write!(f, "{m}"),
        }
    }
}

impl From<RiccatiError> for CliError {
    fn from(e: RiccatiError) -> Self {
        match e {
            RiccatiError::FiniteEscape { .. } => CliError::Escape(e.to_string()),
            RiccatiError::CoercivityLost { .. } => CliError::Coercivity(e.to_string()),
            RiccatiError::BadHorizon { .. } => CliError::Config(e.to_string()),
            RiccatiError::Ode(_) | RiccatiError::Linalg(_) => CliError::Unbounded(e.to_string()),
        }
    }
}

impl From<SemigroupError> for CliError {
    fn from(e: SemigroupError) -> Self {
        match e {
            SemigroupError::DimensionMismatch { .. } | SemigroupError::HorizonOutOfRange { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Unbounded(e.to_string()),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        CliError::Unbounded(e.to_string())
    }
}

impl From<formats::FormatError> for CliError {
    fn from(e: formats::FormatError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "riccati",
    version,
    about = "Differential Riccati flows via max-plus kernel propagation"
)]
struct Cli {
    /// key=value configuration file; defaults apply when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for CSV artifacts
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Seed for every randomized ingredient (terminal batches, probes)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for the terminal-matrix batch
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured problem; writes trajectory and final matrix
    Solve {
        /// Override the integration horizon from the config
        #[arg(long)]
        t: Option<f64>,
    },
    /// Build the step kernel, iterate it, reconstruct each terminal matrix
    Recipe,
    /// Error-versus-time study across methods; writes bench.csv
    Bench,
    /// Run the verification suite and emit a pass/fail table
    Verify {
        /// Run a single named check
        #[arg(long, value_name = "CHECK")]
        only: Option<String>,
        /// Also validate a previously written trajectory dump
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path).map_err(CliError::Config)?,
        None => Config::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let threads = cli.threads.max(1);
    match cli.command {
        Command::Solve { t } => solve::run(&cfg, &cli.out, t, cli.seed),
        Command::Recipe => recipe::run(&cfg, &cli.out, cli.seed, threads),
        Command::Bench => bench::run(&cfg, &cli.out),
        Command::Verify { only, trajectory } => {
            checks::run(&cfg, &cli.out, cli.seed, only.as_deref(), trajectory.as_deref())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        process::exit(e.code());
    }
}
