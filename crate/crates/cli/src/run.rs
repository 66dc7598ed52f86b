//! Single training runs and checkpoint evaluation.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ff_core::checkpoint::Checkpoint;
use ff_core::data::{Dataset, DatasetName, Split};
use ff_core::eval::{default_evaluator, evaluate_checkpoint, EvalOptions, Evaluator};
use ff_core::schedule::{train_network_into, TrainLog};

use crate::config::Settings;
use crate::{dataset_root, resolve_settings, CliError, EvalArgs, TrainArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.ffsv1";
pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.txt";

/// Loads one split, labeling missing data as an environment problem.
/// The core loader's message already names the missing path.
pub fn load_split(root: &Path, name: DatasetName, split: Split) -> Result<Dataset, CliError> {
    Dataset::load(root, name, split).map_err(|e| CliError::Env(e.to_string()))
}

/// Everything a finished training run leaves on disk, plus the numbers
/// the results table needs.
pub struct RunOutcome {
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    pub wall_seconds: f64,
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub config_hash: String,
}

/// Trains per `settings`, writing config, checkpoint, and step log into
/// `out`. The log CSV is written even when training faults so partial
/// runs can be inspected.
pub fn execute_training(
    settings: &Settings,
    train: &Arc<Dataset>,
    out: &Path,
) -> Result<RunOutcome, CliError> {
    let tc = settings.train_config()?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(CONFIG_FILE), settings.canonical())?;

    let log_path = out.join(LOG_FILE);
    let mut log = TrainLog::default();
    let started = Instant::now();
    let trained = train_network_into(&tc, train, &mut log);
    let wall_seconds = started.elapsed().as_secs_f64();
    let write_log = || -> Result<(), CliError> {
        let mut w = BufWriter::new(File::create(&log_path)?);
        log.write_csv(&mut w).map_err(CliError::from)?;
        Ok(())
    };
    let layers = match trained {
        Ok(layers) => {
            write_log()?;
            layers
        }
        Err(e) => {
            write_log()?;
            return Err(e.into());
        }
    };

    let checkpoint = Checkpoint::from_training(layers, &tc);
    let checkpoint_path = out.join(CHECKPOINT_FILE);
    checkpoint.save(&checkpoint_path)?;
    Ok(RunOutcome {
        checkpoint,
        log,
        wall_seconds,
        checkpoint_path,
        log_path,
        config_hash: settings.config_hash(),
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let settings = resolve_settings(&args.overrides)?;
    let root = dataset_root(args.overrides.dataset_dir.as_ref());
    let train = Arc::new(load_split(&root, settings.dataset, Split::Train)?);

    let outcome = execute_training(&settings, &train, &args.out)?;
    println!(
        "trained {} {} {} in {:.1}s (config {})",
        settings.dataset,
        settings.strategy().kind_name(),
        settings.schedule(),
        outcome.wall_seconds,
        &outcome.config_hash[..12],
    );
    println!("checkpoint: {}", outcome.checkpoint_path.display());
    println!("log: {}", outcome.log_path.display());
    Ok(())
}

/// Appends one accuracy row, creating the CSV with a header first.
fn append_eval_row(
    path: &Path,
    checkpoint: &Path,
    dataset: DatasetName,
    evaluator: Evaluator,
    accuracy: f64,
) -> Result<(), CliError> {
    let fresh = !path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(["checkpoint", "dataset", "evaluator", "accuracy"])
            .map_err(csv_err)?;
    }
    w.write_record([
        checkpoint.display().to_string(),
        dataset.to_string(),
        evaluator.to_string(),
        format!("{accuracy}"),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

pub fn csv_err(e: csv::Error) -> CliError {
    CliError::Env(format!("csv write failed: {e}"))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(&args.checkpoint).map_err(CliError::from)?;
    let evaluator = args
        .evaluator
        .unwrap_or_else(|| default_evaluator(&checkpoint.strategy));

    let root = dataset_root(args.dataset_dir.as_ref());
    let test = load_split(&root, args.dataset, Split::Test)?;
    let train = match evaluator {
        Evaluator::Probe => Some(load_split(&root, args.dataset, Split::Train)?),
        Evaluator::Voting => None,
    };

    let mut opts = EvalOptions::default();
    opts.probe.seed = args.probe_seed;
    let accuracy = evaluate_checkpoint(&checkpoint, train.as_ref(), &test, evaluator, &opts)?;
    println!("accuracy {accuracy:.4}");
    append_eval_row(&args.out, &args.checkpoint, args.dataset, evaluator, accuracy)?;
    Ok(())
}
