//! Command-line driver: ingest a mesh, embed it, overfit a surface network,
//! optimize warps, and export correspondences and statistics.

pub mod commands;
pub mod config;
pub mod error;
pub mod keypoints;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Tutte-embed a mesh and overfit a surface network to it.
    Overfit,
    /// Optimize a free-boundary parameterization of a frozen surface.
    Parameterize,
    /// Optimize a surface-to-surface map through the common domain.
    Map,
    /// Jointly optimize a cycle-consistent collection of maps.
    Collection,
    /// Recompute statistics of trained checkpoints.
    Eval,
}

#[derive(Debug, Parser)]
#[command(name = "neuralmaps", version, about = "Neural surface maps")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value, e.g. `--set task.max_steps=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads; 1 gives a strictly sequential run.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides `task.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Runs one command; returns the path of the written report.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let loaded = config::load(&cli.config, &cli.overrides, cli.seed)?;
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| commands::execute(cli.command, &loaded))
        }
        None => commands::execute(cli.command, &loaded),
    }
}
