//! Batch driver for dataset generation, training, evaluation, baselines and
//! validation.
//!
//! Exit codes: 0 on success, 1 when a run or validation fails, 2 for usage
//! and configuration errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

#[derive(Parser)]
#[command(
    name = "riswsr",
    about = "RIS phase-shift optimization: data generation, training, evaluation and validation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the master seed from the config.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Worker threads for per-sample work (overrides the config); results
    /// do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/test dataset archives.
    Generate(CommonArgs),
    /// Train the network on a generated dataset.
    Train(CommonArgs),
    /// Evaluate a checkpoint on the test split.
    Evaluate(CommonArgs),
    /// Score random-phase and identity-phase baselines under WMMSE.
    Baselines(CommonArgs),
    /// Run the oracle and property suite.
    Validate(CommonArgs),
}

fn resolve_config(args: &CommonArgs) -> Result<config::RunConfig, CliError> {
    let mut cfg = config::load_config(&args.config)?;
    if let Some(seed) = args.seed_override {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        cfg.train.threads = threads;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn artifact_dir(cfg: &config::RunConfig) -> Result<PathBuf, CliError> {
    cfg.out
        .clone()
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set \"out\"".into()))
}

fn execute() -> Result<bool, CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(args) => {
            let cfg = resolve_config(args)?;
            let out = artifact_dir(&cfg)?;
            guard(&out, || commands::generate(&cfg, &out))?;
            Ok(true)
        }
        Command::Train(args) => {
            let cfg = resolve_config(args)?;
            let out = artifact_dir(&cfg)?;
            guard(&out, || commands::train(&cfg, &out))?;
            Ok(true)
        }
        Command::Evaluate(args) => {
            let cfg = resolve_config(args)?;
            let out = artifact_dir(&cfg)?;
            guard(&out, || commands::evaluate_cmd(&cfg, &out))?;
            Ok(true)
        }
        Command::Baselines(args) => {
            let cfg = resolve_config(args)?;
            let out = artifact_dir(&cfg)?;
            guard(&out, || commands::baselines(&cfg, &out))?;
            Ok(true)
        }
        Command::Validate(args) => {
            let cfg = resolve_config(args)?;
            commands::validate(&cfg)
        }
    }
}

/// Run a command body, marking the output directory on failure.
fn guard(
    out: &std::path::Path,
    body: impl FnOnce() -> Result<(), CliError>,
) -> Result<(), CliError> {
    match body() {
        Ok(()) => Ok(()),
        Err(e) => {
            if out.exists() {
                commands::mark_incomplete(out, &e.to_string());
            }
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    match execute() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(message)) => {
            eprintln!("configuration error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
