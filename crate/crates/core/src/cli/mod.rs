//! Config-driven experiment runner behind the `clustersim` binary.
//!
//! Exit codes: 0 on success, 1 on usage, parse or validation errors, 2 when
//! a statistical check exceeds its z threshold (the failing record goes to
//! stderr as well as to the normal outputs).

pub mod config;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use run::{execute, Outcome};

#[derive(Debug, Parser)]
#[command(name = "clustersim", version, about = "Cluster point process sampler and identity checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the replica count in the config.
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Worker threads for replica parallelism (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sample configurations and write them as point-pattern CSV.
    Sample,
    /// Empirical against theoretical Laplace functional.
    LaplaceCheck,
    /// Two-pipeline comparison (KS on ⟨f,γ⟩ and Laplace functionals).
    VarpiCheck,
    /// Droplet-cluster identity for σ̄(𝔛_B).
    DropletCheck,
    /// Quasi-invariance under a diffeomorphism.
    QiCheck,
    /// Integration by parts.
    IbpCheck,
    /// Correlation-function identity for n = 1, 2.
    CorrCheck,
    /// Langevin dynamics stationarity, with time series output.
    Dynamics,
    /// Properness diagnostics on a finite window.
    Properness,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::LaplaceCheck => "laplace-check",
            Command::VarpiCheck => "varpi-check",
            Command::DropletCheck => "droplet-check",
            Command::QiCheck => "qi-check",
            Command::IbpCheck => "ibp-check",
            Command::CorrCheck => "corr-check",
            Command::Dynamics => "dynamics",
            Command::Properness => "properness",
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(Outcome::Passed) => 0,
        Ok(Outcome::Failed(records)) => {
            for r in records {
                eprintln!("check failed: {r}");
            }
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
