//! Command-line harness for consensual collaborative training experiments.
//!
//! Subcommands:
//! - `cct train <config.json>`: one run; writes the per-epoch metrics CSV,
//!   final and best checkpoints, and a summary JSON.
//! - `cct sweep <config.json>`: grid over `TrainConfig` fields x seeds;
//!   writes per-cell artifacts plus an aggregated `sweep.csv`.
//! - `cct eval <ckpt.json> <data.csv> [--net J]`: score a checkpoint.
//!
//! Exit codes: 0 ok, 2 invalid config, 3 numeric failure, 4 I/O or format.

mod config;
mod evalcmd;
mod runner;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }

    pub fn code(&self) -> u8 {
        self.code
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl From<cct::Error> for CliError {
    fn from(e: cct::Error) -> Self {
        use cct::Error::*;
        let code = match &e {
            Config(_) | InvalidArchitecture(_) | Label { .. } | State(_) => 2,
            Numeric(_) => 3,
            _ => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "cct", version, about = "Co-training experiments under label noise")]
struct Cli {
    /// Output directory (overrides the config's out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override: replaces the run seed (and a sweep's seed list).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweep cells (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training experiment from a JSON config.
    Train { config: PathBuf },
    /// Run the config's sweep grid and aggregate a results table.
    Sweep { config: PathBuf },
    /// Evaluate a checkpoint against a CSV dataset; prints a metric report.
    Eval {
        checkpoint: PathBuf,
        data: PathBuf,
        /// Use a single network instead of the ensemble mean.
        #[arg(long)]
        net: Option<usize>,
    },
}

fn resolve_out_dir(cli_out: &Option<PathBuf>, exp: &ExperimentConfig, config_path: &Path) -> PathBuf {
    if let Some(dir) = cli_out {
        return dir.clone();
    }
    if let Some(dir) = &exp.out_dir {
        return dir.clone();
    }
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    PathBuf::from("runs").join(stem)
}

fn load_with_overrides(path: &Path, cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut exp = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        exp.train.seed = seed;
        if let Some(sweep) = &mut exp.sweep {
            sweep.seeds = vec![seed];
        }
    }
    Ok(exp)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train { config } => {
            let exp = load_with_overrides(config, cli)?;
            let out_dir = resolve_out_dir(&cli.out, &exp, config);
            let summary = runner::run_experiment(&exp, &out_dir)?;
            if let Some(val) = &summary.final_val {
                println!(
                    "final val: acc {:.4}, f1 {:.4}, overall {:.4}",
                    val.accuracy, val.f1_macro, val.overall
                );
            }
            println!("artifacts in {}", out_dir.display());
            Ok(())
        }
        Command::Sweep { config } => {
            let exp = load_with_overrides(config, cli)?;
            if exp.sweep.is_none() {
                return Err(CliError::config("config has no sweep section"));
            }
            let out_dir = resolve_out_dir(&cli.out, &exp, config);
            sweep::run_sweep(&exp, &out_dir, cli.workers)?;
            println!("sweep table in {}", out_dir.join("sweep.csv").display());
            Ok(())
        }
        Command::Eval { checkpoint, data, net } => {
            let report = evalcmd::evaluate_checkpoint(checkpoint, data, *net)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(cct::Error::from)?
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
