//! Fully connected layers trained by their own local objective: forward
//! pass, analytic gradients of the phase losses with respect to this
//! layer's parameters only, Adam updates, and the activity normalization
//! applied between layers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Phase, Result};
use crate::loss::{self, Real};

/// Training hyperparameters shared by every layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub threshold: f64,
    pub base_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub norm_eps: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            threshold: 1.5,
            base_lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            norm_eps: 1e-4,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be > 0, got {}",
                self.threshold
            )));
        }
        if !(self.base_lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "base_lr must be > 0, got {}",
                self.base_lr
            )));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.adam_eps > 0.0) || !(self.norm_eps >= 0.0) {
            return Err(Error::InvalidArgument(
                "adam_eps must be > 0 and norm_eps >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// First/second moment estimates for one (weights, bias) parameter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<R> {
    m_w: Array2<R>,
    v_w: Array2<R>,
    m_b: Array1<R>,
    v_b: Array1<R>,
    t: u64,
}

impl<R: Real> AdamState<R> {
    pub fn new(out_dim: usize, in_dim: usize) -> Self {
        AdamState {
            m_w: Array2::zeros((out_dim, in_dim)),
            v_w: Array2::zeros((out_dim, in_dim)),
            m_b: Array1::zeros(out_dim),
            v_b: Array1::zeros(out_dim),
            t: 0,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `weights` and `bias` in place.
    pub fn step(
        &mut self,
        weights: &mut Array2<R>,
        bias: &mut Array1<R>,
        grad_w: ArrayView2<'_, R>,
        grad_b: ArrayView1<'_, R>,
        lr: R,
        hyper: &Hyper,
    ) -> Result<()> {
        let one = R::one();
        let b1 = R::real(hyper.adam_beta1);
        let b2 = R::real(hyper.adam_beta2);
        let eps = R::real(hyper.adam_eps);
        self.t += 1;
        let t = i32::try_from(self.t).expect("step count fits i32");
        let c1 = one - b1.powi(t);
        let c2 = one - b2.powi(t);

        ndarray::Zip::from(&mut self.m_w)
            .and(&grad_w)
            .for_each(|m, &g| *m = b1 * *m + (one - b1) * g);
        ndarray::Zip::from(&mut self.v_w)
            .and(&grad_w)
            .for_each(|v, &g| *v = b2 * *v + (one - b2) * g * g);
        ndarray::Zip::from(&mut self.m_b)
            .and(&grad_b)
            .for_each(|m, &g| *m = b1 * *m + (one - b1) * g);
        ndarray::Zip::from(&mut self.v_b)
            .and(&grad_b)
            .for_each(|v, &g| *v = b2 * *v + (one - b2) * g * g);

        ndarray::Zip::from(&mut *weights)
            .and(&self.m_w)
            .and(&self.v_w)
            .for_each(|w, &m, &v| *w = *w - lr * (m / c1) / ((v / c2).sqrt() + eps));
        ndarray::Zip::from(&mut *bias)
            .and(&self.m_b)
            .and(&self.v_b)
            .for_each(|b, &m, &v| *b = *b - lr * (m / c1) / ((v / c2).sqrt() + eps));

        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite {
                context: "weights after update",
            });
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite {
                context: "bias after update",
            });
        }
        Ok(())
    }
}

/// Gradients of one phase's batch-mean loss with respect to a single
/// layer's parameters, plus the scalars worth logging.
#[derive(Debug, Clone)]
pub struct LocalGrads<R> {
    pub grad_w: Array2<R>,
    pub grad_b: Array1<R>,
    pub mean_loss: R,
    pub mean_goodness: R,
}

/// Loss and goodness of the batch a step was taken on.
#[derive(Debug, Clone, Copy)]
pub struct StepStats<R> {
    pub loss: R,
    pub goodness_mean: R,
}

/// One fully connected ReLU layer with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct FFLayer<R = f32> {
    weights: Array2<R>,
    bias: Array1<R>,
    adam: AdamState<R>,
}

impl<R: Real> FFLayer<R> {
    /// Fresh layer with weights uniform in +-1/sqrt(in_dim) and zero bias.
    pub fn new<G: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut G) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weights =
            Array2::from_shape_fn((out_dim, in_dim), |_| R::real(rng.random_range(-bound..bound)));
        FFLayer {
            weights,
            bias: Array1::zeros(out_dim),
            adam: AdamState::new(out_dim, in_dim),
        }
    }

    /// Layer from existing parameters with fresh optimizer state.
    pub fn from_parts(weights: Array2<R>, bias: Array1<R>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::InvalidArgument(format!(
                "bias length {} does not match {} output rows",
                bias.len(),
                weights.nrows()
            )));
        }
        let adam = AdamState::new(weights.nrows(), weights.ncols());
        Ok(FFLayer {
            weights,
            bias,
            adam,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> ArrayView2<'_, R> {
        self.weights.view()
    }

    pub fn bias(&self) -> ArrayView1<'_, R> {
        self.bias.view()
    }

    pub fn adam(&self) -> &AdamState<R> {
        &self.adam
    }

    /// Post-ReLU activations `max(0, input W^T + bias)`, rowwise.
    pub fn forward(&self, input: ArrayView2<'_, R>) -> Result<Array2<R>> {
        if input.ncols() != self.in_dim() {
            return Err(Error::InvalidArgument(format!(
                "input has {} columns, layer expects {}",
                input.ncols(),
                self.in_dim()
            )));
        }
        let mut z = input.dot(&self.weights.t()) + &self.bias;
        z.mapv_inplace(|v| v.max(R::zero()));
        Ok(z)
    }

    /// Analytic gradient of the phase's batch-mean loss w.r.t. this
    /// layer's parameters only.
    ///
    /// Per sample, dLoss/dg is -logistic(threshold - g) in the positive
    /// phase and logistic(g - threshold) in the negative phase; dg/da is
    /// 2a/H; the ReLU factor 1[z > 0] is absorbed because a = 0 exactly
    /// where z <= 0 (subgradient at 0 taken as 0).
    pub fn local_gradients(
        &self,
        input: ArrayView2<'_, R>,
        phase: Phase,
        threshold: R,
    ) -> Result<LocalGrads<R>> {
        let mut act = self.forward(input)?;
        let batch = R::real(act.nrows() as f64);
        let hidden = R::real(act.ncols() as f64);
        let goodness = loss::goodness_rows(act.view());

        let mut loss_sum = R::zero();
        let mut goodness_sum = R::zero();
        let scale = R::real(2.0) / (batch * hidden);
        for (mut row, &g) in act.rows_mut().into_iter().zip(goodness.iter()) {
            let (sample_loss, coeff) = match phase {
                Phase::Positive => (
                    loss::loss_positive(g, threshold),
                    -loss::logistic(threshold - g),
                ),
                Phase::Negative => (
                    loss::loss_negative(g, threshold),
                    loss::logistic(g - threshold),
                ),
            };
            loss_sum = loss_sum + sample_loss;
            goodness_sum = goodness_sum + g;
            let factor = coeff * scale;
            row.mapv_inplace(|a| a * factor);
        }

        let grad_w = act.t().dot(&input);
        let grad_b = act.sum_axis(Axis(0));
        if grad_w.iter().any(|g| !g.is_finite()) || grad_b.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: "local gradient",
            });
        }
        Ok(LocalGrads {
            grad_w,
            grad_b,
            mean_loss: loss_sum / batch,
            mean_goodness: goodness_sum / batch,
        })
    }

    pub fn adam_step(&mut self, grads: &LocalGrads<R>, lr: R, hyper: &Hyper) -> Result<()> {
        self.adam.step(
            &mut self.weights,
            &mut self.bias,
            grads.grad_w.view(),
            grads.grad_b.view(),
            lr,
            hyper,
        )
    }

    /// Gradient plus update in one call; returns the batch's loss and
    /// goodness for the log.
    pub fn train_step(
        &mut self,
        input: ArrayView2<'_, R>,
        phase: Phase,
        lr: R,
        hyper: &Hyper,
    ) -> Result<StepStats<R>> {
        let grads = self.local_gradients(input, phase, R::real(hyper.threshold))?;
        self.adam_step(&grads, lr, hyper)?;
        Ok(StepStats {
            loss: grads.mean_loss,
            goodness_mean: grads.mean_goodness,
        })
    }
}

/// Divides each row by its Euclidean norm plus `norm_eps`, so only the
/// activity direction reaches the next layer.
pub fn normalize_activity<R: Real>(activations: ArrayView2<'_, R>, norm_eps: R) -> Array2<R> {
    let mut out = activations.to_owned();
    for mut row in out.rows_mut() {
        let norm = row.iter().map(|&a| a * a).sum::<R>().sqrt();
        let denom = norm + norm_eps;
        if denom > R::zero() {
            row.mapv_inplace(|a| a / denom);
        }
    }
    out
}

/// Input seen by the layer after `layers`: raw pixels for an empty
/// prefix, otherwise the normalized activity of the last prefix layer.
pub fn prefix_transform<R: Real>(
    layers: &[FFLayer<R>],
    input: ArrayView2<'_, R>,
    norm_eps: R,
) -> Result<Array2<R>> {
    let mut current = input.to_owned();
    for layer in layers {
        let act = layer.forward(current.view())?;
        current = normalize_activity(act.view(), norm_eps);
    }
    Ok(current)
}

/// Raw post-ReLU activations of every layer, with activity normalization
/// applied between consecutive layers.
pub fn forward_all<R: Real>(
    layers: &[FFLayer<R>],
    input: ArrayView2<'_, R>,
    norm_eps: R,
) -> Result<Vec<Array2<R>>> {
    let mut out = Vec::with_capacity(layers.len());
    let mut current = input.to_owned();
    for (i, layer) in layers.iter().enumerate() {
        let act = layer.forward(current.view())?;
        if i + 1 < layers.len() {
            current = normalize_activity(act.view(), norm_eps);
        }
        out.push(act);
    }
    Ok(out)
}
