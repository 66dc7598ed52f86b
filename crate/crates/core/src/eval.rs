//! Test-set evaluation: goodness voting over candidate label overlays
//! for supervised networks, and a linear softmax probe on frozen hidden
//! representations for unsupervised ones.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::data::{Dataset, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::layer::{forward_all, normalize_activity, AdamState, FFLayer, Hyper};
use crate::loss::goodness_rows;
use crate::negdata::{overlay_label_row, NegStrategy};

/// Which accuracy protocol to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    Voting,
    Probe,
}

impl std::fmt::Display for Evaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Evaluator::Voting => f.write_str("voting"),
            Evaluator::Probe => f.write_str("probe"),
        }
    }
}

impl std::str::FromStr for Evaluator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voting" => Ok(Evaluator::Voting),
            "probe" => Ok(Evaluator::Probe),
            other => Err(Error::InvalidArgument(format!(
                "unknown evaluator {other:?} (expected voting or probe)"
            ))),
        }
    }
}

/// The evaluator a training strategy calls for: voting for supervised
/// wrong-label networks, probe for masks networks.
pub fn default_evaluator(strategy: &NegStrategy) -> Evaluator {
    match strategy {
        NegStrategy::WrongLabel => Evaluator::Voting,
        NegStrategy::Masks { .. } => Evaluator::Probe,
    }
}

/// Linear probe training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub lr: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            lr: 1e-3,
            epochs: 20,
            batch_size: 512,
            seed: 0,
        }
    }
}

/// Evaluation settings beyond the evaluator choice itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Exclude the first layer's goodness from voting.
    pub voting_skip_first_layer: bool,
    /// Include the first layer's activity in probe features.
    pub probe_include_first_layer: bool,
    pub probe: ProbeConfig,
    /// Rows evaluated per forward pass.
    pub batch_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            voting_skip_first_layer: false,
            probe_include_first_layer: false,
            probe: ProbeConfig::default(),
            batch_size: 512,
        }
    }
}

/// Smallest index holding the row's maximum.
fn argmax_label(row: ArrayView1<'_, f32>) -> u8 {
    let mut best = 0usize;
    for i in 1..row.len() {
        if row[i] > row[best] {
            best = i;
        }
    }
    best as u8
}

/// Per-candidate total goodness: `votes[b, l]` sums every counted
/// layer's goodness when row `b` carries the overlay for label `l`.
pub fn goodness_votes(
    layers: &[FFLayer<f32>],
    pixels: ArrayView2<'_, f32>,
    norm_eps: f32,
    skip_first_layer: bool,
) -> Result<Array2<f32>> {
    if layers.is_empty() {
        return Err(Error::InvalidArgument("no layers to vote with".into()));
    }
    if skip_first_layer && layers.len() < 2 {
        return Err(Error::InvalidArgument(
            "skipping the first layer leaves a single-layer network without votes".into(),
        ));
    }
    let rows = pixels.nrows();
    let mut votes = Array2::<f32>::zeros((rows, NUM_CLASSES));
    let mut overlaid = pixels.to_owned();
    let start = usize::from(skip_first_layer);
    for candidate in 0..NUM_CLASSES as u8 {
        for mut row in overlaid.rows_mut() {
            overlay_label_row(row.as_slice_mut().expect("rows are contiguous"), candidate);
        }
        let acts = forward_all(layers, overlaid.view(), norm_eps)?;
        for act in &acts[start..] {
            let g = goodness_rows(act.view());
            for b in 0..rows {
                votes[[b, candidate as usize]] += g[b];
            }
        }
    }
    Ok(votes)
}

/// Predicted labels by goodness voting; ties go to the smallest label.
pub fn classify_by_goodness(
    layers: &[FFLayer<f32>],
    pixels: ArrayView2<'_, f32>,
    norm_eps: f32,
    skip_first_layer: bool,
) -> Result<Vec<u8>> {
    let votes = goodness_votes(layers, pixels, norm_eps, skip_first_layer)?;
    Ok(votes.rows().into_iter().map(argmax_label).collect())
}

/// Fraction of predictions matching the labels.
pub fn fraction_correct(predictions: &[u8], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / labels.len() as f64
}

/// Goodness-voting accuracy over a full test split.
pub fn voting_accuracy(
    layers: &[FFLayer<f32>],
    test: &Dataset,
    norm_eps: f32,
    skip_first_layer: bool,
    batch_size: usize,
) -> Result<f64> {
    let mut correct = 0usize;
    let pixels = test.pixels();
    for begin in (0..test.len()).step_by(batch_size.max(1)) {
        let end = (begin + batch_size).min(test.len());
        let chunk = pixels.slice(s![begin..end, ..]);
        let predictions = classify_by_goodness(layers, chunk, norm_eps, skip_first_layer)?;
        correct += predictions
            .iter()
            .zip(&test.labels()[begin..end])
            .filter(|(p, l)| p == l)
            .count();
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Concatenated normalized activities of the counted layers (2..L by
/// default, 1..L when `include_first_layer`).
pub fn extract_features(
    layers: &[FFLayer<f32>],
    pixels: ArrayView2<'_, f32>,
    norm_eps: f32,
    include_first_layer: bool,
) -> Result<Array2<f32>> {
    let start = usize::from(!include_first_layer);
    if start >= layers.len() {
        return Err(Error::InvalidArgument(
            "probe features need at least two layers unless the first is included".into(),
        ));
    }
    let acts = forward_all(layers, pixels, norm_eps)?;
    let normalized: Vec<Array2<f32>> = acts[start..]
        .iter()
        .map(|a| normalize_activity(a.view(), norm_eps))
        .collect();
    let views: Vec<ArrayView2<'_, f32>> = normalized.iter().map(|a| a.view()).collect();
    ndarray::concatenate(Axis(1), &views)
        .map_err(|e| Error::InvalidArgument(format!("feature concatenation failed: {e}")))
}

/// Softmax classifier over frozen features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub weights: Array2<f32>,
    pub bias: Array1<f32>,
    /// Mean training loss per epoch, in epoch order.
    pub epoch_losses: Vec<f32>,
}

impl LinearProbe {
    pub fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, features: ArrayView2<'_, f32>) -> Vec<u8> {
        let logits = features.dot(&self.weights.t()) + &self.bias;
        logits.rows().into_iter().map(argmax_label).collect()
    }
}

/// Batch-mean softmax cross-entropy and its gradients.
fn softmax_ce_grads(
    weights: &Array2<f32>,
    bias: &Array1<f32>,
    x: ArrayView2<'_, f32>,
    y: &[u8],
) -> (f32, Array2<f32>, Array1<f32>) {
    let mut logits = x.dot(&weights.t()) + bias;
    let batch = x.nrows();
    let mut loss = 0.0f32;
    for (mut row, &label) in logits.rows_mut().into_iter().zip(y) {
        let max = row.fold(f32::NEG_INFINITY, |m, &v| m.max(v));
        let shifted_true = row[label as usize] - max;
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f32 = row.sum();
        loss += sum.ln() - shifted_true;
        row.mapv_inplace(|v| v / sum);
        row[label as usize] -= 1.0;
    }
    let scale = 1.0 / batch as f32;
    logits.mapv_inplace(|v| v * scale);
    let grad_w = logits.t().dot(&x);
    let grad_b = logits.sum_axis(Axis(0));
    (loss * scale, grad_w, grad_b)
}

/// Trains a probe on the features `layers` produce for `train`; the
/// layers themselves are never touched.
pub fn train_linear_probe(
    layers: &[FFLayer<f32>],
    train: &Dataset,
    norm_eps: f32,
    include_first_layer: bool,
    cfg: &ProbeConfig,
) -> Result<LinearProbe> {
    if cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "probe config needs epochs >= 1, batch_size >= 1, lr > 0, got {cfg:?}"
        )));
    }
    // materialize features once; probe epochs then cost only the 10-way
    // product, not repeated passes through the network
    let n = train.len();
    let mut features: Option<Array2<f32>> = None;
    let chunk_rows = 2048;
    for begin in (0..n).step_by(chunk_rows) {
        let end = (begin + chunk_rows).min(n);
        let chunk = extract_features(
            layers,
            train.pixels().slice(s![begin..end, ..]),
            norm_eps,
            include_first_layer,
        )?;
        let all = features
            .get_or_insert_with(|| Array2::zeros((n, chunk.ncols())));
        all.slice_mut(s![begin..end, ..]).assign(&chunk);
    }
    let features = features.expect("dataset is non-empty");
    let f = features.ncols();

    let mut weights = Array2::<f32>::zeros((NUM_CLASSES, f));
    let mut bias = Array1::<f32>::zeros(NUM_CLASSES);
    let mut adam = AdamState::<f32>::new(NUM_CLASSES, f);
    let hyper = Hyper {
        base_lr: cfg.lr,
        ..Hyper::default()
    };
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs as usize);
    let mut xb = Array2::<f32>::zeros((cfg.batch_size.min(n), f));
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::from(epoch));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let rows = chunk.len();
            let mut yb = Vec::with_capacity(rows);
            for (slot, &idx) in chunk.iter().enumerate() {
                xb.row_mut(slot).assign(&features.row(idx as usize));
                yb.push(train.labels()[idx as usize]);
            }
            let x = xb.slice(s![..rows, ..]);
            let (loss, grad_w, grad_b) = softmax_ce_grads(&weights, &bias, x, &yb);
            adam.step(
                &mut weights,
                &mut bias,
                grad_w.view(),
                grad_b.view(),
                cfg.lr as f32,
                &hyper,
            )?;
            loss_sum += f64::from(loss);
            batches += 1;
        }
        epoch_losses.push((loss_sum / batches as f64) as f32);
    }
    Ok(LinearProbe {
        weights,
        bias,
        epoch_losses,
    })
}

/// Probe accuracy over a full test split.
pub fn probe_accuracy(
    probe: &LinearProbe,
    layers: &[FFLayer<f32>],
    test: &Dataset,
    norm_eps: f32,
    include_first_layer: bool,
    batch_size: usize,
) -> Result<f64> {
    let mut correct = 0usize;
    for begin in (0..test.len()).step_by(batch_size.max(1)) {
        let end = (begin + batch_size).min(test.len());
        let features = extract_features(
            layers,
            test.pixels().slice(s![begin..end, ..]),
            norm_eps,
            include_first_layer,
        )?;
        let predictions = probe.predict(features.view());
        correct += predictions
            .iter()
            .zip(&test.labels()[begin..end])
            .filter(|(p, l)| p == l)
            .count();
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Runs the chosen evaluator on a checkpoint, enforcing that the
/// protocol matches how the network was trained. The probe path needs
/// the training split to fit the probe on.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    train: Option<&Dataset>,
    test: &Dataset,
    evaluator: Evaluator,
    opts: &EvalOptions,
) -> Result<f64> {
    let norm_eps = checkpoint.hyper.norm_eps as f32;
    match evaluator {
        Evaluator::Voting => {
            if !checkpoint.supports_voting() {
                return Err(Error::EvaluatorMismatch {
                    detail: format!(
                        "goodness voting needs label-overlaid positives, but this {} network \
                         trained without overlays; use the probe evaluator",
                        checkpoint.strategy
                    ),
                });
            }
            voting_accuracy(
                &checkpoint.layers,
                test,
                norm_eps,
                opts.voting_skip_first_layer,
                opts.batch_size,
            )
        }
        Evaluator::Probe => {
            let train = train.ok_or_else(|| Error::EvaluatorMismatch {
                detail: "probe evaluation needs the training split to fit the probe".into(),
            })?;
            let probe = train_linear_probe(
                &checkpoint.layers,
                train,
                norm_eps,
                opts.probe_include_first_layer,
                &opts.probe,
            )?;
            probe_accuracy(
                &probe,
                &checkpoint.layers,
                test,
                norm_eps,
                opts.probe_include_first_layer,
                opts.batch_size,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetName, Split, IMAGE_PIXELS};
    use crate::schedule::PhaseSchedule;
    use ndarray::Array2;
    use rand::Rng;

    fn zero_net(dims: &[(usize, usize)]) -> Vec<FFLayer<f32>> {
        dims.iter()
            .map(|&(i, o)| {
                FFLayer::from_parts(Array2::zeros((o, i)), Array1::zeros(o)).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_network_ties_break_to_label_zero() {
        let layers = zero_net(&[(IMAGE_PIXELS, 4)]);
        let pixels = Array2::from_elem((3, IMAGE_PIXELS), 0.5f32);
        let pred = classify_by_goodness(&layers, pixels.view(), 1e-4, false).unwrap();
        assert_eq!(pred, vec![0, 0, 0]);
    }

    #[test]
    fn exact_tie_prefers_the_smaller_label() {
        // weights read only overlay pixels 2 and 5: candidates 2 and 5
        // score identically, everything else scores zero
        let mut w = Array2::<f32>::zeros((2, IMAGE_PIXELS));
        w[[0, 2]] = 3.0;
        w[[1, 5]] = 3.0;
        let layers = vec![FFLayer::from_parts(w, Array1::zeros(2)).unwrap()];
        let pixels = Array2::<f32>::zeros((1, IMAGE_PIXELS));
        let votes = goodness_votes(&layers, pixels.view(), 1e-4, false).unwrap();
        assert_eq!(votes[[0, 2]], votes[[0, 5]]);
        assert!(votes[[0, 2]] > votes[[0, 0]]);
        let pred = classify_by_goodness(&layers, pixels.view(), 1e-4, false).unwrap();
        assert_eq!(pred, vec![2]);
    }

    // unit h fires on overlay pixel h and on body marker pixel 10+h, so
    // the candidate matching the body marker doubles its activation and
    // wins the vote
    fn marker_net() -> Vec<FFLayer<f32>> {
        let mut w = Array2::<f32>::zeros((NUM_CLASSES, IMAGE_PIXELS));
        for h in 0..NUM_CLASSES {
            w[[h, h]] = 2.0;
            w[[h, NUM_CLASSES + h]] = 2.0;
        }
        vec![FFLayer::from_parts(w, Array1::zeros(NUM_CLASSES)).unwrap()]
    }

    #[test]
    fn voting_reads_the_overlay_body_interaction() {
        let layers = marker_net();
        for marker in 0..NUM_CLASSES {
            let mut pixels = Array2::<f32>::zeros((1, IMAGE_PIXELS));
            pixels[[0, NUM_CLASSES + marker]] = 1.0;
            let pred = classify_by_goodness(&layers, pixels.view(), 1e-4, false).unwrap();
            assert_eq!(pred, vec![marker as u8]);
        }
    }

    #[test]
    fn votes_match_a_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let layers = vec![
            FFLayer::<f32>::new(IMAGE_PIXELS, 5, &mut rng),
            FFLayer::<f32>::new(5, 4, &mut rng),
        ];
        let pixels = Array2::from_shape_fn((2, IMAGE_PIXELS), |_| rng.random_range(0.0f32..1.0));
        let eps = 1e-4f32;
        let votes = goodness_votes(&layers, pixels.view(), eps, false).unwrap();
        for cand in 0..NUM_CLASSES {
            let mut overlaid = pixels.clone();
            for mut row in overlaid.rows_mut() {
                overlay_label_row(row.as_slice_mut().unwrap(), cand as u8);
            }
            for b in 0..2 {
                let mut expected = 0.0f32;
                // layer 1 by scalar loops
                let mut a1 = vec![0.0f32; 5];
                for h in 0..5 {
                    let mut z = layers[0].bias()[h];
                    for j in 0..IMAGE_PIXELS {
                        z += layers[0].weights()[[h, j]] * overlaid[[b, j]];
                    }
                    a1[h] = z.max(0.0);
                }
                expected += a1.iter().map(|a| a * a).sum::<f32>() / 5.0;
                let norm = a1.iter().map(|a| a * a).sum::<f32>().sqrt() + eps;
                let n1: Vec<f32> = a1.iter().map(|a| a / norm).collect();
                let mut a2 = vec![0.0f32; 4];
                for h in 0..4 {
                    let mut z = layers[1].bias()[h];
                    for (j, &v) in n1.iter().enumerate() {
                        z += layers[1].weights()[[h, j]] * v;
                    }
                    a2[h] = z.max(0.0);
                }
                expected += a2.iter().map(|a| a * a).sum::<f32>() / 4.0;
                let got = votes[[b, cand]];
                assert!(
                    (got - expected).abs() <= 1e-4 * expected.abs().max(1.0),
                    "cand {cand} row {b}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn skip_first_layer_needs_a_second_layer() {
        let layers = marker_net();
        let pixels = Array2::<f32>::zeros((1, IMAGE_PIXELS));
        assert!(goodness_votes(&layers, pixels.view(), 1e-4, true).is_err());
    }

    #[test]
    fn fraction_correct_hand_cases() {
        assert_eq!(fraction_correct(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(fraction_correct(&[1, 0, 3], &[1, 2, 3]), 2.0 / 3.0);
        assert_eq!(fraction_correct(&[], &[]), 0.0);
    }

    fn labeled_blocks_dataset(n: usize) -> Dataset {
        // label l brightens pixel block 100 + 20l..100 + 20l + 20
        let mut pixels = Array2::<f32>::zeros((n, IMAGE_PIXELS));
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        for (i, &label) in labels.iter().enumerate() {
            for j in 0..20 {
                pixels[[i, 100 + 20 * label as usize + j]] = 1.0;
            }
            pixels[[i, 700 + i % 50]] = 0.3;
        }
        Dataset::from_parts(DatasetName::Mnist, Split::Train, pixels, labels).unwrap()
    }

    #[test]
    fn probe_learns_a_linearly_separable_task() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layers = vec![
            FFLayer::<f32>::new(IMAGE_PIXELS, 64, &mut rng),
            FFLayer::<f32>::new(64, 32, &mut rng),
        ];
        let data = labeled_blocks_dataset(200);
        let cfg = ProbeConfig {
            epochs: 30,
            batch_size: 32,
            ..ProbeConfig::default()
        };
        let probe = train_linear_probe(&layers, &data, 1e-4, false, &cfg).unwrap();
        assert_eq!(probe.feature_dim(), 32);
        let acc = probe_accuracy(&probe, &layers, &data, 1e-4, false, 64).unwrap();
        assert!(acc >= 0.9, "probe accuracy {acc}");
        let first = probe.epoch_losses.first().unwrap();
        let last = probe.epoch_losses.last().unwrap();
        assert!(last < first, "losses {:?}", probe.epoch_losses);
        for w in probe.epoch_losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-3, "epoch loss rose: {:?}", probe.epoch_losses);
        }
    }

    #[test]
    fn probe_training_is_deterministic_and_leaves_layers_frozen() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let layers = vec![
            FFLayer::<f32>::new(IMAGE_PIXELS, 16, &mut rng),
            FFLayer::<f32>::new(16, 8, &mut rng),
        ];
        let before: Vec<Array2<f32>> = layers.iter().map(|l| l.weights().to_owned()).collect();
        let data = labeled_blocks_dataset(100);
        let cfg = ProbeConfig {
            epochs: 5,
            batch_size: 32,
            ..ProbeConfig::default()
        };
        let a = train_linear_probe(&layers, &data, 1e-4, false, &cfg).unwrap();
        let b = train_linear_probe(&layers, &data, 1e-4, false, &cfg).unwrap();
        assert_eq!(a, b);
        for (layer, w) in layers.iter().zip(&before) {
            assert_eq!(layer.weights(), w.view());
        }
    }

    #[test]
    fn feature_dims_concatenate_counted_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layers = vec![
            FFLayer::<f32>::new(IMAGE_PIXELS, 6, &mut rng),
            FFLayer::<f32>::new(6, 5, &mut rng),
            FFLayer::<f32>::new(5, 4, &mut rng),
        ];
        let pixels = Array2::<f32>::zeros((2, IMAGE_PIXELS));
        assert_eq!(
            extract_features(&layers, pixels.view(), 1e-4, false).unwrap().ncols(),
            9
        );
        assert_eq!(
            extract_features(&layers, pixels.view(), 1e-4, true).unwrap().ncols(),
            15
        );
        assert!(extract_features(&layers[..1], pixels.view(), 1e-4, false).is_err());
    }

    #[test]
    fn voting_on_unoverlaid_checkpoint_is_a_mode_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let checkpoint = Checkpoint {
            layers: vec![
                FFLayer::<f32>::new(IMAGE_PIXELS, 6, &mut rng),
                FFLayer::<f32>::new(6, 5, &mut rng),
            ],
            hyper: Hyper::default(),
            strategy: NegStrategy::masks_default(),
            schedule: PhaseSchedule::Unseparated,
            overlay_positives: false,
        };
        let data = labeled_blocks_dataset(50);
        let err = evaluate_checkpoint(&checkpoint, None, &data, Evaluator::Voting, &EvalOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::EvaluatorMismatch { .. }), "{err}");

        let err =
            evaluate_checkpoint(&checkpoint, None, &data, Evaluator::Probe, &EvalOptions::default())
                .unwrap_err();
        assert!(matches!(err, Error::EvaluatorMismatch { .. }), "{err}");
    }
}
