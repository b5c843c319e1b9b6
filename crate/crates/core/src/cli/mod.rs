//! `meanrev` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or I/O problem, 3 failed
//! validation, 4 numerical failure. Every failure also prints one JSON line
//! `{"error": kind, "code": n, "message": ...}` on stderr.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::models::ModelKind;
use crate::vi_solver::{EdgeCondition, Generator};

pub use config::{parse_time, RawConfig, TimeValue};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerics(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerics(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Validation(_) => "validation",
            CliError::Numerics(_) => "numerics",
        }
    }

    /// Machine-readable one-line summary.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "code": self.exit_code(), "message": self.to_string() }).to_string()
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::NonConvergence { .. } => CliError::Numerics(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Values that override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file (TOML, one table per module)
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`)
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Spot model: ou, cir or xou
    #[arg(long, global = true)]
    pub kind: Option<ModelKind>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub mu_q: Option<f64>,
    #[arg(long, global = true)]
    pub theta_q: Option<f64>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Futures maturity, in years or `Nd` trading days
    #[arg(long, global = true)]
    pub maturity: Option<String>,
    /// Trading deadline, in years or `Nd` trading days
    #[arg(long, global = true)]
    pub deadline: Option<String>,
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    #[arg(long, global = true)]
    pub cost: Option<f64>,
    #[arg(long, global = true)]
    pub cost_hat: Option<f64>,
    #[arg(long, global = true)]
    pub n_time: Option<usize>,
    #[arg(long, global = true)]
    pub n_space: Option<usize>,
    /// historical, risk_neutral or printed
    #[arg(long, global = true)]
    pub generator: Option<Generator>,
    /// linear or pinned
    #[arg(long, global = true)]
    pub edges: Option<EdgeCondition>,
    /// Also write solver surfaces
    #[arg(long, global = true)]
    pub surfaces: bool,
}

#[derive(Debug, Parser)]
#[command(name = "meanrev", version, about = "Futures on mean-reverting spot prices")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check model, contract and grid parameters
    Validate,
    /// Futures price f(t, s; T)
    Price {
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        s: f64,
        /// Maturity (years or `Nd`); defaults to the contract maturity
        #[arg(long = "T")]
        maturity: Option<String>,
    },
    /// Futures term structure at t = 0
    Curve {
        #[arg(long)]
        s0: Option<f64>,
    },
    /// Fit risk-neutral parameters to quoted futures prices
    Calibrate {
        /// CSV with columns `maturity,price` (maturity in years or `Nd`)
        #[arg(long)]
        quotes: Option<PathBuf>,
        #[arg(long)]
        s0: Option<f64>,
    },
    /// Expected roll yield, optionally against Monte Carlo
    Rollyield {
        #[arg(long)]
        s0: Option<f64>,
        /// Monte-Carlo paths (0 skips the simulation)
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// Sign scan of the liquidation integrand and the delayed liquidation premium
    Premium {
        #[arg(long)]
        s0: Option<f64>,
        /// Write premium values on the solver grid
        #[arg(long)]
        values: bool,
    },
    /// Optimal entry and exit boundaries
    Boundaries,
    /// Simulate spot paths
    Simulate {
        #[arg(long)]
        n_paths: Option<usize>,
    },
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Config(e.kind().to_string());
            eprint!("{e}");
            eprintln!("{}", err.to_json_line());
            return err.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json_line());
            err.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mut raw = match &cli.overrides.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    raw.apply(&cli.overrides);
    let ctx = commands::Context { raw, config_path: cli.overrides.config.clone() };
    match &cli.command {
        Command::Validate => commands::validate(&ctx),
        Command::Price { t, s, maturity } => commands::price(&ctx, t.as_deref(), *s, maturity.as_deref()),
        Command::Curve { s0 } => commands::curve(&ctx, *s0),
        Command::Calibrate { quotes, s0 } => commands::calibrate(&ctx, quotes.clone(), *s0),
        Command::Rollyield { s0, n_paths } => commands::rollyield(&ctx, *s0, *n_paths),
        Command::Premium { s0, values } => commands::premium(&ctx, *s0, *values),
        Command::Boundaries => commands::boundaries(&ctx),
        Command::Simulate { n_paths } => commands::simulate(&ctx, *n_paths),
    }
}
