//! Greedy layer-wise training under a phase schedule.
//!
//! The positive ("awake") and negative ("sleep") phases are either
//! interleaved within every step (the unseparated baseline) or run in
//! alternating periods measured in whole batches. Epochs are counted as
//! completed passes over the positive dataset, so total positive
//! exposure is the same across schedules.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{mix_seed, BatchStream, Dataset, IMAGE_PIXELS};
use crate::error::{Error, Phase, Result};
use crate::layer::{prefix_transform, FFLayer, Hyper, LocalGrads};
use crate::negdata::{negative_batch, positive_batch, NegStrategy};

/// How the two phases share the batch sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseSchedule {
    /// Every step draws one positive and one negative batch and applies
    /// one update on the average of the two losses.
    Unseparated,
    /// `awake_period` positive batches, then `sleep_period` negative
    /// batches, repeating.
    Alternating { awake_period: u32, sleep_period: u32 },
}

impl PhaseSchedule {
    pub fn validate(&self) -> Result<()> {
        if let PhaseSchedule::Alternating {
            awake_period,
            sleep_period,
        } = self
        {
            if *awake_period < 1 || *sleep_period < 1 {
                return Err(Error::InvalidArgument(format!(
                    "alternating periods must be >= 1, got awake {awake_period} sleep {sleep_period}"
                )));
            }
        }
        Ok(())
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            PhaseSchedule::Unseparated => "unseparated",
            PhaseSchedule::Alternating { .. } => "alternating",
        }
    }

    pub fn awake_period(&self) -> u32 {
        match self {
            PhaseSchedule::Unseparated => 1,
            PhaseSchedule::Alternating { awake_period, .. } => *awake_period,
        }
    }

    pub fn sleep_period(&self) -> u32 {
        match self {
            PhaseSchedule::Unseparated => 1,
            PhaseSchedule::Alternating { sleep_period, .. } => *sleep_period,
        }
    }
}

impl std::fmt::Display for PhaseSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.mode_name())
    }
}

/// Positive-phase learning rate under an awake period of the given
/// length; the negative phase always runs at `base_lr`.
pub fn positive_lr(base_lr: f64, awake_period: u32) -> Result<f64> {
    if awake_period < 1 {
        return Err(Error::InvalidArgument(format!(
            "awake_period must be >= 1, got {awake_period}"
        )));
    }
    Ok(base_lr / f64::from(awake_period))
}

/// Independent seeds for weight init and the two data streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub init: u64,
    pub pos_stream: u64,
    pub neg_stream: u64,
}

impl Seeds {
    /// Expands one user-facing seed into independent component seeds.
    pub fn from_base(base: u64) -> Self {
        Seeds {
            init: mix_seed(base, 1),
            pos_stream: mix_seed(base, 2),
            neg_stream: mix_seed(base, 3),
        }
    }
}

/// Everything that determines one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layer_dims: Vec<usize>,
    pub epochs_per_layer: u32,
    pub batch_size: usize,
    pub hyper: Hyper,
    pub schedule: PhaseSchedule,
    pub strategy: NegStrategy,
    pub seeds: Seeds,
    /// Whether positive batches carry true-label overlays. Defaults to
    /// the strategy's convention (on for wrong-label, off for masks);
    /// switching it on for masks enables goodness voting at eval time.
    pub overlay_positives: bool,
    /// Count negative batches toward the epoch budget too, instead of
    /// only completed positive passes.
    pub count_negative_batches: bool,
}

impl TrainConfig {
    pub fn new(schedule: PhaseSchedule, strategy: NegStrategy, seeds: Seeds) -> Self {
        TrainConfig {
            layer_dims: vec![IMAGE_PIXELS, 500, 500, 500],
            epochs_per_layer: 50,
            batch_size: 512,
            hyper: Hyper::default(),
            schedule,
            strategy,
            seeds,
            overlay_positives: strategy.overlays_positives(),
            count_negative_batches: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "layer_dims needs an input dim and at least one hidden layer".into(),
            ));
        }
        if self.layer_dims[0] != IMAGE_PIXELS {
            return Err(Error::InvalidArgument(format!(
                "layer_dims[0] must be {IMAGE_PIXELS}, got {}",
                self.layer_dims[0]
            )));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("layer dims must be >= 1".into()));
        }
        if self.epochs_per_layer < 1 {
            return Err(Error::InvalidArgument(format!(
                "epochs_per_layer must be >= 1, got {}",
                self.epochs_per_layer
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if let NegStrategy::Masks { blur_iterations } = self.strategy {
            if blur_iterations < 1 {
                return Err(Error::InvalidArgument(format!(
                    "blur_iterations must be >= 1, got {blur_iterations}"
                )));
            }
        }
        if self.strategy == NegStrategy::WrongLabel && !self.overlay_positives {
            return Err(Error::InvalidArgument(
                "wrong-label training requires label overlays on positive batches".into(),
            ));
        }
        self.hyper.validate()?;
        self.schedule.validate()
    }

    /// Learning rate for positive-phase steps under this schedule.
    pub fn positive_lr(&self) -> f64 {
        match self.schedule {
            PhaseSchedule::Unseparated => self.hyper.base_lr,
            PhaseSchedule::Alternating { awake_period, .. } => {
                self.hyper.base_lr / f64::from(awake_period)
            }
        }
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }
}

/// Phase tag of one logged step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogPhase {
    Positive,
    Negative,
    /// Unseparated steps update on both phases at once.
    Both,
}

impl std::fmt::Display for LogPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LogPhase::Positive => f.write_str("pos"),
            LogPhase::Negative => f.write_str("neg"),
            LogPhase::Both => f.write_str("both"),
        }
    }
}

/// One gradient step as recorded in the training log. For `Both` steps
/// the goodness is the positive batch's, so the same field tracks how
/// strongly real data activates the layer in every mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub step: u64,
    pub layer: usize,
    pub phase: LogPhase,
    pub loss: f32,
    pub goodness_mean: f32,
    pub lr: f64,
}

/// Step-level log of a whole run plus per-layer wall time.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
    pub layer_seconds: Vec<f64>,
}

impl TrainLog {
    /// Phase tags of one layer's steps as a compact string of
    /// P/N/B characters, in step order.
    pub fn phase_string(&self, layer: usize) -> String {
        self.entries
            .iter()
            .filter(|e| e.layer == layer)
            .map(|e| match e.phase {
                LogPhase::Positive => 'P',
                LogPhase::Negative => 'N',
                LogPhase::Both => 'B',
            })
            .collect()
    }

    /// Steps of one layer that consumed a positive batch (positive and
    /// unseparated steps alike).
    pub fn positive_steps(&self, layer: usize) -> usize {
        self.entries
            .iter()
            .filter(|e| e.layer == layer && e.phase != LogPhase::Negative)
            .count()
    }

    /// Mean goodness over the last `count` positive-consuming steps of
    /// one layer; feeds the "no learning" rendering rule.
    pub fn final_positive_goodness(&self, layer: usize, count: usize) -> Option<f32> {
        let tail: Vec<f32> = self
            .entries
            .iter()
            .filter(|e| e.layer == layer && e.phase != LogPhase::Negative)
            .map(|e| e.goodness_mean)
            .collect();
        if tail.is_empty() || count == 0 {
            return None;
        }
        let take = count.min(tail.len());
        Some(tail[tail.len() - take..].iter().sum::<f32>() / take as f32)
    }

    /// Writes the log as CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,layer,phase,loss,goodness_mean,lr")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.step, e.layer, e.phase, e.loss, e.goodness_mean, e.lr
            )?;
        }
        Ok(())
    }
}

fn fault(source: Error, layer: usize, step: u64, phase: Phase) -> Error {
    match source {
        already @ Error::TrainingFault { .. } => already,
        other => Error::TrainingFault {
            layer,
            step,
            phase,
            source: Box::new(other),
        },
    }
}

struct LayerRun<'a> {
    config: &'a TrainConfig,
    frozen: &'a [FFLayer<f32>],
    layer_index: usize,
    pos: BatchStream,
    neg: BatchStream,
    neg_rng: ChaCha8Rng,
    step: u64,
    batches_seen: u64,
}

impl LayerRun<'_> {
    /// Training batch for `phase`, routed through the frozen prefix.
    fn transformed_batch(&mut self, phase: Phase) -> Result<ndarray::Array2<f32>> {
        let batch = match phase {
            Phase::Positive => {
                positive_batch(&mut self.pos, self.config.overlay_positives)
            }
            Phase::Negative => {
                negative_batch(self.config.strategy, &mut self.neg, &mut self.neg_rng)
            }
        };
        self.batches_seen += 1;
        prefix_transform(
            self.frozen,
            batch.pixels.view(),
            self.config.hyper.norm_eps as f32,
        )
        .map_err(|e| fault(e, self.layer_index, self.step, phase))
    }

    fn epoch_budget_spent(&self) -> bool {
        let target = u64::from(self.config.epochs_per_layer);
        if self.config.count_negative_batches {
            let n = self.pos.dataset().len() as u64;
            let b = self.config.batch_size as u64;
            let batches_per_epoch = n.div_ceil(b);
            self.batches_seen >= target * batches_per_epoch
        } else {
            self.pos.epochs_completed() >= target
        }
    }

    fn push_log(&self, log: &mut TrainLog, phase: LogPhase, loss: f32, goodness: f32, lr: f64) {
        log.entries.push(LogEntry {
            step: self.step,
            layer: self.layer_index,
            phase,
            loss,
            goodness_mean: goodness,
            lr,
        });
    }
}

/// Trains one layer to completion on top of its frozen prefix, pushing
/// one log entry per gradient step.
pub fn train_layer(
    mut layer: FFLayer<f32>,
    pos: BatchStream,
    neg: BatchStream,
    neg_rng: ChaCha8Rng,
    config: &TrainConfig,
    frozen: &[FFLayer<f32>],
    layer_index: usize,
    log: &mut TrainLog,
) -> Result<FFLayer<f32>> {
    let hyper = &config.hyper;
    let threshold = hyper.threshold as f32;
    let mut run = LayerRun {
        config,
        frozen,
        layer_index,
        pos,
        neg,
        neg_rng,
        step: 0,
        batches_seen: 0,
    };

    match config.schedule {
        PhaseSchedule::Unseparated => {
            let lr = hyper.base_lr;
            loop {
                run.step += 1;
                let px = run.transformed_batch(Phase::Positive)?;
                let nx = run.transformed_batch(Phase::Negative)?;
                let gp = layer
                    .local_gradients(px.view(), Phase::Positive, threshold)
                    .map_err(|e| fault(e, layer_index, run.step, Phase::Positive))?;
                let gn = layer
                    .local_gradients(nx.view(), Phase::Negative, threshold)
                    .map_err(|e| fault(e, layer_index, run.step, Phase::Negative))?;
                let merged = LocalGrads {
                    grad_w: (&gp.grad_w + &gn.grad_w) * 0.5,
                    grad_b: (&gp.grad_b + &gn.grad_b) * 0.5,
                    mean_loss: (gp.mean_loss + gn.mean_loss) * 0.5,
                    mean_goodness: gp.mean_goodness,
                };
                layer
                    .adam_step(&merged, lr as f32, hyper)
                    .map_err(|e| fault(e, layer_index, run.step, Phase::Positive))?;
                run.push_log(log, LogPhase::Both, merged.mean_loss, gp.mean_goodness, lr);
                if run.epoch_budget_spent() {
                    break;
                }
            }
        }
        PhaseSchedule::Alternating {
            awake_period,
            sleep_period,
        } => {
            let pos_lr = config.positive_lr();
            let neg_lr = hyper.base_lr;
            // the stopping check sits at cycle boundaries so the phase
            // pattern is always an integer number of full cycles
            loop {
                for _ in 0..awake_period {
                    run.step += 1;
                    let px = run.transformed_batch(Phase::Positive)?;
                    let stats = layer
                        .train_step(px.view(), Phase::Positive, pos_lr as f32, hyper)
                        .map_err(|e| fault(e, layer_index, run.step, Phase::Positive))?;
                    run.push_log(log, LogPhase::Positive, stats.loss, stats.goodness_mean, pos_lr);
                }
                for _ in 0..sleep_period {
                    run.step += 1;
                    let nx = run.transformed_batch(Phase::Negative)?;
                    let stats = layer
                        .train_step(nx.view(), Phase::Negative, neg_lr as f32, hyper)
                        .map_err(|e| fault(e, layer_index, run.step, Phase::Negative))?;
                    run.push_log(log, LogPhase::Negative, stats.loss, stats.goodness_mean, neg_lr);
                }
                if run.epoch_budget_spent() {
                    break;
                }
            }
        }
    }
    Ok(layer)
}

/// Trains every hidden layer greedily: each layer runs to completion on
/// the frozen, normalized outputs of its predecessors.
pub fn train_network(
    config: &TrainConfig,
    train: &Arc<Dataset>,
) -> Result<(Vec<FFLayer<f32>>, TrainLog)> {
    let mut log = TrainLog::default();
    let layers = train_network_into(config, train, &mut log)?;
    Ok((layers, log))
}

/// Like [`train_network`] but appends to a caller-owned log, so steps
/// recorded before a training fault survive the error.
pub fn train_network_into(
    config: &TrainConfig,
    train: &Arc<Dataset>,
    log: &mut TrainLog,
) -> Result<Vec<FFLayer<f32>>> {
    config.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seeds.init);
    let mut layers: Vec<FFLayer<f32>> = Vec::with_capacity(config.hidden_layers());

    for l in 1..config.layer_dims.len() {
        let layer = FFLayer::new(config.layer_dims[l - 1], config.layer_dims[l], &mut init_rng);
        let pos = BatchStream::new(
            Arc::clone(train),
            config.batch_size,
            mix_seed(config.seeds.pos_stream, l as u64),
        )?;
        let neg = BatchStream::new(
            Arc::clone(train),
            config.batch_size,
            mix_seed(config.seeds.neg_stream, l as u64),
        )?;
        let neg_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(config.seeds.neg_stream, 1000 + l as u64));
        let started = Instant::now();
        let trained = train_layer(layer, pos, neg, neg_rng, config, &layers, l, log)?;
        log.layer_seconds.push(started.elapsed().as_secs_f64());
        layers.push(trained);
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, DatasetName, Split};
    use ndarray::Array2;

    fn tiny_dataset(n: usize) -> Arc<Dataset> {
        let mut pixels = Array2::<f32>::zeros((n, IMAGE_PIXELS));
        for i in 0..n {
            for j in 0..IMAGE_PIXELS {
                pixels[[i, j]] = ((i * 13 + j * 3) % 17) as f32 / 17.0;
            }
        }
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        Arc::new(Dataset::from_parts(DatasetName::Mnist, Split::Train, pixels, labels).unwrap())
    }

    fn tiny_config(schedule: PhaseSchedule) -> TrainConfig {
        let mut config = TrainConfig::new(
            schedule,
            NegStrategy::WrongLabel,
            Seeds::from_base(7),
        );
        config.layer_dims = vec![IMAGE_PIXELS, 6, 5];
        config.epochs_per_layer = 2;
        config.batch_size = 10;
        config
    }

    fn run_tiny(schedule: PhaseSchedule, n: usize) -> (Vec<FFLayer<f32>>, TrainLog) {
        train_network(&tiny_config(schedule), &tiny_dataset(n)).unwrap()
    }

    #[test]
    fn positive_lr_follows_the_division_rule() {
        assert_eq!(positive_lr(0.001, 1).unwrap(), 0.001);
        assert_eq!(positive_lr(0.001, 8).unwrap(), 0.000125);
        assert_eq!(positive_lr(0.001, 16).unwrap(), 0.0000625);
        assert!(positive_lr(0.001, 0).is_err());
    }

    #[test]
    fn alternating_one_one_strictly_alternates() {
        let (_, log) = run_tiny(
            PhaseSchedule::Alternating {
                awake_period: 1,
                sleep_period: 1,
            },
            40,
        );
        let phases = log.phase_string(1);
        assert!(phases.len() >= 8);
        for (i, c) in phases.chars().enumerate() {
            assert_eq!(c, if i % 2 == 0 { 'P' } else { 'N' });
        }
    }

    #[test]
    fn alternating_four_one_repeats_the_cycle() {
        let (_, log) = run_tiny(
            PhaseSchedule::Alternating {
                awake_period: 4,
                sleep_period: 1,
            },
            40,
        );
        let phases = log.phase_string(2);
        assert_eq!(phases.len() % 5, 0);
        for chunk in phases.as_bytes().chunks(5) {
            assert_eq!(chunk, b"PPPPN");
        }
    }

    #[test]
    fn learning_rates_follow_the_phase_rule() {
        let (_, log) = run_tiny(
            PhaseSchedule::Alternating {
                awake_period: 4,
                sleep_period: 1,
            },
            40,
        );
        for e in &log.entries {
            match e.phase {
                LogPhase::Positive => assert_eq!(e.lr, 0.001 / 4.0),
                LogPhase::Negative => assert_eq!(e.lr, 0.001),
                LogPhase::Both => unreachable!(),
            }
        }
    }

    #[test]
    fn unseparated_logs_both_at_base_lr() {
        let (_, log) = run_tiny(PhaseSchedule::Unseparated, 40);
        assert!(!log.entries.is_empty());
        for e in &log.entries {
            assert_eq!(e.phase, LogPhase::Both);
            assert_eq!(e.lr, 0.001);
        }
    }

    #[test]
    fn positive_batches_stay_within_one_period_of_the_budget() {
        // 100 samples, batch 10, 2 epochs: 20 positive batches needed
        let mut config = tiny_config(PhaseSchedule::Alternating {
            awake_period: 8,
            sleep_period: 1,
        });
        config.layer_dims = vec![IMAGE_PIXELS, 5];
        let (_, log) = train_network(&config, &tiny_dataset(100)).unwrap();
        let pos_steps = log.positive_steps(1);
        assert!(pos_steps >= 20 && pos_steps < 20 + 8, "{pos_steps}");
        // and the log is whole cycles: 3 cycles of (8 P + 1 N)
        assert_eq!(log.phase_string(1), "PPPPPPPPN".repeat(3));
    }

    #[test]
    fn step_indices_increase_within_each_layer() {
        let (_, log) = run_tiny(PhaseSchedule::Unseparated, 30);
        for layer in 1..=2 {
            let steps: Vec<u64> = log
                .entries
                .iter()
                .filter(|e| e.layer == layer)
                .map(|e| e.step)
                .collect();
            assert!(!steps.is_empty());
            assert!(steps.windows(2).all(|w| w[1] == w[0] + 1));
            assert_eq!(steps[0], 1);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let schedule = PhaseSchedule::Alternating {
            awake_period: 2,
            sleep_period: 2,
        };
        let (layers_a, log_a) = run_tiny(schedule, 30);
        let (layers_b, log_b) = run_tiny(schedule, 30);
        assert_eq!(layers_a.len(), layers_b.len());
        for (a, b) in layers_a.iter().zip(&layers_b) {
            assert_eq!(a.weights(), b.weights());
            assert_eq!(a.bias(), b.bias());
        }
        assert_eq!(log_a.entries, log_b.entries);
    }

    #[test]
    fn greedy_training_freezes_the_prefix() {
        // layer 1 must come out identical whether or not layer 2 trains
        let mut one_layer = tiny_config(PhaseSchedule::Unseparated);
        one_layer.layer_dims = vec![IMAGE_PIXELS, 6];
        let (short, _) = train_network(&one_layer, &tiny_dataset(30)).unwrap();
        let (full, _) = run_tiny(PhaseSchedule::Unseparated, 30);
        assert_eq!(short[0].weights(), full[0].weights());
        assert_eq!(short[0].bias(), full[0].bias());
    }

    #[test]
    fn network_shapes_follow_layer_dims() {
        let (layers, log) = run_tiny(PhaseSchedule::Unseparated, 30);
        assert_eq!(layers.len(), 2);
        assert_eq!((layers[0].out_dim(), layers[0].in_dim()), (6, IMAGE_PIXELS));
        assert_eq!((layers[1].out_dim(), layers[1].in_dim()), (5, 6));
        assert_eq!(log.layer_seconds.len(), 2);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let seeds = Seeds::from_base(0);
        let mut config = TrainConfig::new(PhaseSchedule::Unseparated, NegStrategy::WrongLabel, seeds);
        config.epochs_per_layer = 0;
        assert!(config.validate().is_err());

        let mut config = TrainConfig::new(PhaseSchedule::Unseparated, NegStrategy::WrongLabel, seeds);
        config.layer_dims = vec![100, 5];
        assert!(config.validate().is_err());

        let config = TrainConfig::new(
            PhaseSchedule::Alternating {
                awake_period: 0,
                sleep_period: 1,
            },
            NegStrategy::WrongLabel,
            seeds,
        );
        assert!(config.validate().is_err());

        let config = TrainConfig::new(
            PhaseSchedule::Unseparated,
            NegStrategy::Masks { blur_iterations: 0 },
            seeds,
        );
        assert!(config.validate().is_err());

        let mut config = TrainConfig::new(PhaseSchedule::Unseparated, NegStrategy::WrongLabel, seeds);
        config.overlay_positives = false;
        assert!(config.validate().is_err());
    }

    #[test]
    fn faults_carry_layer_step_phase_context() {
        let mut config = tiny_config(PhaseSchedule::Unseparated);
        config.hyper.base_lr = 1e30;
        let err = train_network(&config, &tiny_dataset(30)).unwrap_err();
        match err {
            Error::TrainingFault { layer, step, .. } => {
                assert_eq!(layer, 1);
                assert!(step >= 1);
            }
            other => panic!("expected training fault, got {other}"),
        }
    }

    #[test]
    fn csv_log_has_header_and_one_row_per_entry() {
        let (_, log) = run_tiny(PhaseSchedule::Unseparated, 30);
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,layer,phase,loss,goodness_mean,lr");
        assert_eq!(lines.len(), log.entries.len() + 1);
        assert!(lines[1].starts_with("1,1,both,"));
    }

    #[test]
    fn masks_mode_trains_on_unlabeled_positives() {
        let mut config = tiny_config(PhaseSchedule::Unseparated);
        config.strategy = NegStrategy::masks_default();
        config.overlay_positives = config.strategy.overlays_positives();
        assert!(!config.overlay_positives);
        let (layers, _) = train_network(&config, &tiny_dataset(30)).unwrap();
        assert_eq!(layers.len(), 2);
    }

    #[test]
    fn counting_negative_batches_shortens_alternating_runs() {
        let schedule = PhaseSchedule::Alternating {
            awake_period: 1,
            sleep_period: 1,
        };
        let mut config = tiny_config(schedule);
        config.layer_dims = vec![IMAGE_PIXELS, 5];
        let (_, pos_only) = train_network(&config, &tiny_dataset(40)).unwrap();
        config.count_negative_batches = true;
        let (_, all_batches) = train_network(&config, &tiny_dataset(40)).unwrap();
        assert!(all_batches.entries.len() < pos_only.entries.len());
    }
}
