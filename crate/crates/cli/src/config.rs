//! Flat `key = value` run configuration: file grammar, flag overrides,
//! and the canonical form that is hashed into run records.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment that
//! runs to end of line; blank lines ignored. Keys are kebab-case and
//! match the CLI flag names. Unknown keys are errors so typos surface
//! instead of silently training the wrong model.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ff_core::data::DatasetName;
use ff_core::eval::{default_evaluator, Evaluator};
use ff_core::layer::Hyper;
use ff_core::negdata::{NegStrategy, DEFAULT_BLUR_ITERATIONS};
use ff_core::schedule::{PhaseSchedule, Seeds, TrainConfig};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_HIDDEN: [usize; 3] = [500, 500, 500];

/// Strategy selector before blur iterations are attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StrategyArg {
    WrongLabel,
    Masks,
}

/// Schedule selector before periods are attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Unseparated,
    Alternating,
}

/// Fully resolved run settings: defaults, then config file, then flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub dataset: DatasetName,
    pub strategy_kind: StrategyArg,
    pub blur_iterations: u32,
    pub mode: ModeArg,
    pub awake_period: u32,
    pub sleep_period: u32,
    pub epochs_per_layer: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    pub hyper: Hyper,
    pub evaluator: Option<Evaluator>,
    pub probe_seed: u64,
    pub count_negative_batches: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            dataset: DatasetName::Mnist,
            strategy_kind: StrategyArg::WrongLabel,
            blur_iterations: DEFAULT_BLUR_ITERATIONS,
            mode: ModeArg::Unseparated,
            awake_period: 1,
            sleep_period: 1,
            epochs_per_layer: 50,
            batch_size: 512,
            seed: DEFAULT_SEED,
            hidden_dims: DEFAULT_HIDDEN.to_vec(),
            hyper: Hyper::default(),
            evaluator: None,
            probe_seed: 0,
            count_negative_batches: false,
        }
    }
}

fn bad_value(key: &str, value: &str, expected: &str) -> CliError {
    CliError::Env(format!(
        "config error: {key}: expected {expected}, got '{value}'"
    ))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad_value(key, value, expected))
}

impl Settings {
    /// Applies one key/value pair from a config file.
    fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "dataset" => {
                self.dataset = value
                    .parse()
                    .map_err(|_| bad_value(key, value, "mnist or fashion-mnist"))?;
            }
            "strategy" => {
                self.strategy_kind = match value {
                    "wrong-label" => StrategyArg::WrongLabel,
                    "masks" => StrategyArg::Masks,
                    _ => return Err(bad_value(key, value, "wrong-label or masks")),
                };
            }
            "mode" => {
                self.mode = match value {
                    "unseparated" => ModeArg::Unseparated,
                    "alternating" => ModeArg::Alternating,
                    _ => return Err(bad_value(key, value, "unseparated or alternating")),
                };
            }
            "awake-period" => self.awake_period = parse_num(key, value, "a positive integer")?,
            "sleep-period" => self.sleep_period = parse_num(key, value, "a positive integer")?,
            "epochs-per-layer" => {
                self.epochs_per_layer = parse_num(key, value, "a positive integer")?;
            }
            "batch-size" => self.batch_size = parse_num(key, value, "a positive integer")?,
            "seed" => self.seed = parse_num(key, value, "an unsigned integer")?,
            "blur-iterations" => {
                self.blur_iterations = parse_num(key, value, "a positive integer")?;
            }
            "hidden-dims" => {
                let dims: Result<Vec<usize>, _> = value
                    .split(',')
                    .map(|d| parse_num(key, d.trim(), "comma-separated positive integers"))
                    .collect();
                self.hidden_dims = dims?;
            }
            "threshold" => self.hyper.threshold = parse_num(key, value, "a number")?,
            "learning-rate" => self.hyper.base_lr = parse_num(key, value, "a number")?,
            "evaluator" => {
                self.evaluator = Some(
                    value
                        .parse()
                        .map_err(|_| bad_value(key, value, "voting or probe"))?,
                );
            }
            "probe-seed" => self.probe_seed = parse_num(key, value, "an unsigned integer")?,
            "count-negative-batches" => {
                self.count_negative_batches = parse_num(key, value, "true or false")?;
            }
            _ => {
                return Err(CliError::Env(format!("config error: unknown key '{key}'")));
            }
        }
        Ok(())
    }

    /// Applies a block of `key = value` lines on top of current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Env(format!(
                    "config error: line {}: expected 'key = value', got '{line}'",
                    idx + 1
                ))
            })?;
            self.apply(key.trim(), value.trim()).map_err(|e| match e {
                CliError::Env(msg) => CliError::Env(format!("{msg} (line {})", idx + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Parses a config file on top of defaults.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Env(format!("config error: cannot read {}: {e}", path.display()))
        })?;
        let mut settings = Settings::default();
        settings.apply_text(&text)?;
        Ok(settings)
    }

    pub fn strategy(&self) -> NegStrategy {
        match self.strategy_kind {
            StrategyArg::WrongLabel => NegStrategy::WrongLabel,
            StrategyArg::Masks => NegStrategy::Masks {
                blur_iterations: self.blur_iterations,
            },
        }
    }

    pub fn schedule(&self) -> PhaseSchedule {
        match self.mode {
            ModeArg::Unseparated => PhaseSchedule::Unseparated,
            ModeArg::Alternating => PhaseSchedule::Alternating {
                awake_period: self.awake_period,
                sleep_period: self.sleep_period,
            },
        }
    }

    pub fn evaluator(&self) -> Evaluator {
        self.evaluator
            .unwrap_or_else(|| default_evaluator(&self.strategy()))
    }

    pub fn probe_seed(&self) -> u64 {
        self.probe_seed
    }

    /// Builds and validates the core training config.
    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let mut tc = TrainConfig::new(
            self.schedule(),
            self.strategy(),
            Seeds::from_base(self.seed),
        );
        tc.layer_dims = std::iter::once(ff_core::data::IMAGE_PIXELS)
            .chain(self.hidden_dims.iter().copied())
            .collect();
        tc.epochs_per_layer = self.epochs_per_layer;
        tc.batch_size = self.batch_size;
        tc.hyper = self.hyper;
        tc.count_negative_batches = self.count_negative_batches;
        tc.validate()
            .map_err(|e| CliError::Env(format!("config error: {e}")))?;
        Ok(tc)
    }

    /// Canonical sorted `key = value` rendering. Every default is
    /// materialized so the hash also pins the built-in defaults.
    pub fn canonical(&self) -> String {
        let mut pairs: BTreeMap<&str, String> = BTreeMap::new();
        pairs.insert("dataset", self.dataset.dir_name().to_string());
        pairs.insert("strategy", self.strategy().kind_name().to_string());
        pairs.insert("blur-iterations", self.blur_iterations.to_string());
        pairs.insert(
            "mode",
            match self.mode {
                ModeArg::Unseparated => "unseparated",
                ModeArg::Alternating => "alternating",
            }
            .to_string(),
        );
        pairs.insert("awake-period", self.awake_period.to_string());
        pairs.insert("sleep-period", self.sleep_period.to_string());
        pairs.insert("epochs-per-layer", self.epochs_per_layer.to_string());
        pairs.insert("batch-size", self.batch_size.to_string());
        pairs.insert("seed", self.seed.to_string());
        pairs.insert(
            "hidden-dims",
            self.hidden_dims
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        pairs.insert("threshold", self.hyper.threshold.to_string());
        pairs.insert("learning-rate", self.hyper.base_lr.to_string());
        pairs.insert("adam-beta1", self.hyper.adam_beta1.to_string());
        pairs.insert("adam-beta2", self.hyper.adam_beta2.to_string());
        pairs.insert("adam-eps", self.hyper.adam_eps.to_string());
        pairs.insert("norm-eps", self.hyper.norm_eps.to_string());
        pairs.insert("evaluator", self.evaluator().to_string());
        pairs.insert("probe-seed", self.probe_seed.to_string());
        pairs.insert(
            "count-negative-batches",
            self.count_negative_batches.to_string(),
        );
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of the canonical rendering.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }
}
