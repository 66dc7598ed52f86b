//! `ff`: train goodness networks, evaluate checkpoints, run experiment
//! grids, and dump generated samples for visual inspection.
//!
//! Exit codes: 0 success, 2 environment or config problem, 3 usage or
//! evaluator/checkpoint mode mismatch, 4 training fault.

mod config;
mod experiment;
mod inspect;
mod run;
mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{ModeArg, StrategyArg};

/// Errors carrying their process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Missing datasets, unreadable files, invalid configuration.
    Env(String),
    /// Wrong invocation: incompatible evaluator, malformed checkpoint use.
    Usage(String),
    /// Training diverged or produced non-finite values.
    Fault(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Env(_) => 2,
            CliError::Usage(_) => 3,
            CliError::Fault(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Env(msg) | CliError::Usage(msg) | CliError::Fault(msg) => f.write_str(msg),
        }
    }
}

impl From<ff_core::Error> for CliError {
    fn from(e: ff_core::Error) -> Self {
        match e {
            ff_core::Error::TrainingFault { .. } | ff_core::Error::NonFinite { .. } => {
                CliError::Fault(format!("training fault: {e}"))
            }
            ff_core::Error::EvaluatorMismatch { .. } => CliError::Usage(format!("{e}")),
            other => CliError::Env(format!("{other}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Env(format!("{e}"))
    }
}

#[derive(Parser)]
#[command(name = "ff", version, about = "Forward-forward goodness network trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and write its checkpoint and step log.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint on a test split.
    Eval(EvalArgs),
    /// Run a full experiment grid and render its results table.
    Experiment(ExperimentArgs),
    /// Dump positive and negative samples as PGM images.
    Inspect(InspectArgs),
}

/// Flags shared by every command that resolves a run configuration.
/// Flag values override config-file values, which override defaults.
#[derive(clap::Args, Clone, Default)]
struct ConfigOverrides {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding mnist/ and fashion-mnist/ (falls back to $FF_DATA_DIR, then ./data).
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    /// Dataset to train on.
    #[arg(long)]
    dataset: Option<ff_core::data::DatasetName>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Epochs of positive data each layer trains for.
    #[arg(long)]
    epochs_per_layer: Option<u32>,
    /// Batches of positive data per awake period.
    #[arg(long)]
    awake_period: Option<u32>,
    /// Batches of negative data per sleep period.
    #[arg(long)]
    sleep_period: Option<u32>,
    /// Negative data generation strategy.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Phase schedule mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Output directory for checkpoint, log, and resolved config.
    #[arg(long, default_value = "ff-run")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Checkpoint to evaluate.
    checkpoint: PathBuf,
    /// Directory holding mnist/ and fashion-mnist/ (falls back to $FF_DATA_DIR, then ./data).
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    /// Dataset whose test split is scored.
    #[arg(long, default_value = "mnist")]
    dataset: ff_core::data::DatasetName,
    /// Evaluator override (defaults to the checkpoint's training strategy).
    #[arg(long)]
    evaluator: Option<ff_core::eval::Evaluator>,
    /// Probe training seed (probe evaluator only).
    #[arg(long, default_value_t = 0)]
    probe_seed: u64,
    /// CSV file that accuracy rows are appended to.
    #[arg(long, default_value = "eval_results.csv")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    /// Grid to run: table1, table2, table3, or a custom grid file path.
    grid: String,
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Output directory for per-cell artifacts, results.csv, and table.md.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent grid cells (default: half the available cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(clap::Args)]
struct InspectArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Positive/negative sample pairs to dump.
    #[arg(long, default_value_t = 8)]
    count: usize,
    /// Output directory for PGM files.
    #[arg(long, default_value = "ff-inspect")]
    out: PathBuf,
}

/// Resolves the dataset root: flag, then FF_DATA_DIR, then ./data.
fn dataset_root(flag: Option<&PathBuf>) -> PathBuf {
    flag.cloned()
        .or_else(|| std::env::var_os("FF_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn resolve_settings(overrides: &ConfigOverrides) -> Result<config::Settings, CliError> {
    let mut settings = match &overrides.config {
        Some(path) => config::Settings::from_file(path)?,
        None => config::Settings::default(),
    };
    if let Some(d) = overrides.dataset {
        settings.dataset = d;
    }
    if let Some(s) = overrides.seed {
        settings.seed = s;
    }
    if let Some(e) = overrides.epochs_per_layer {
        settings.epochs_per_layer = e;
    }
    if let Some(a) = overrides.awake_period {
        settings.awake_period = a;
    }
    if let Some(s) = overrides.sleep_period {
        settings.sleep_period = s;
    }
    if let Some(s) = overrides.strategy {
        settings.strategy_kind = s;
    }
    if let Some(m) = overrides.mode {
        settings.mode = m;
    }
    Ok(settings)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => run::cmd_train(&args),
        Command::Eval(args) => run::cmd_eval(&args),
        Command::Experiment(args) => experiment::cmd_experiment(&args),
        Command::Inspect(args) => inspect::cmd_inspect(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
