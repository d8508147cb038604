//! Library surface of the batch CLI (`respike`), split out so integration
//! tests can drive the command implementations directly.

pub mod config;
pub mod run;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use run::RunContext;

#[derive(Parser, Debug)]
#[command(
    name = "respike",
    about = "Simulate a resetting PDMP exactly and verify its spiking limit",
    version
)]
pub struct Cli {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: machine parallelism). Results are identical
    /// at any thread count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the model admissibility conditions.
    Validate,
    /// Write pre-spike pattern and trajectory CSVs.
    Simulate,
    /// Run a named verification suite.
    Verify {
        #[arg(long, value_parser = respike_core::suites::SUITES)]
        suite: String,
    },
    /// Summarize reports.jsonl from a previous run.
    Report,
}

pub fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out));
    let rc = RunContext {
        cfg,
        out,
        threads: cli.threads,
    };
    match &cli.command {
        Command::Validate => run::cmd_validate(&rc),
        Command::Simulate => run::cmd_simulate(&rc),
        Command::Verify { suite } => run::cmd_verify(&rc, suite),
        Command::Report => run::cmd_report(&rc.out),
    }
}
