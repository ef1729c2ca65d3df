//! Experiment runner behind the `evolop` binary.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "evolop", version, about = "Kernel evolution operator learning experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Generate,
    Fit,
    Spectrum,
    Forecast,
    Benchmark,
}

/// Runs one command and returns the path of its main output.
pub fn run(command: Command, config: &std::path::Path, out: &std::path::Path) -> Result<PathBuf> {
    let cfg = ExperimentConfig::load(config)?;
    match command {
        Command::Generate => commands::generate(&cfg, out),
        Command::Fit => commands::fit_model(&cfg, out),
        Command::Spectrum => commands::spectrum(&cfg, out),
        Command::Forecast => commands::forecast(&cfg, out),
        Command::Benchmark => commands::benchmark(&cfg, out),
    }
}
