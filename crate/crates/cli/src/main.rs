//! `ddarts`: search, derive, compare and encode cell-based architectures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "ddarts", version, about = "Distributed differentiable architecture search")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; artifacts go to `<out>/<run-name>/`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run name; defaults to `<command>-s<seed>`.
    #[arg(long, global = true)]
    name: Option<String>,
    /// Configuration override, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an architecture search and write genotype, metrics, distances and checkpoint.
    Search,
    /// Expand a genotype to `n` cells.
    Derive { genotype: String, n: usize },
    /// Distance between two genotypes, or the matrix over a directory of documents.
    Distance {
        first: String,
        second: Option<String>,
        /// `op,score` CSV replacing the published weights.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Write the genotype document of a handcrafted network.
    Encode {
        /// resnet18, resnet50 or xception.
        arch: String,
        /// Also write a warm-start logit checkpoint.
        #[arg(long)]
        alpha: bool,
    },
    /// Discretize the logits of a checkpoint (path without extension).
    Parse {
        checkpoint: PathBuf,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Generate the synthetic dataset as a raster file.
    Gendata,
    /// Benchmark every operation on a proxy network.
    Opscore,
    /// Summary statistics of pairwise distances.
    Stats {
        /// Genotype documents or directories of them.
        #[arg(required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.global, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;

fn exit_code(e: &anyhow::Error) -> u8 {
    use ddarts_core::DeriveError;
    use ddarts_search::SearchError;
    for cause in e.chain() {
        if cause.is::<ConfigError>() || matches!(cause.downcast_ref(), Some(DeriveError::ZeroCells)) {
            return EXIT_CONFIG;
        }
        match cause.downcast_ref::<SearchError>() {
            Some(SearchError::Divergence { .. }) => return EXIT_DIVERGENCE,
            Some(SearchError::Config(_)) => return EXIT_CONFIG,
            _ => {}
        }
    }
    EXIT_FAILURE
}
