//! FFSV1 checkpoint serialization.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "FFSV1"
//! u32 layer count
//! per layer: u32 in_dim, u32 out_dim,
//!            f32 weights (row-major, out_dim x in_dim), f32 bias (out_dim)
//! hyper block: f32 threshold, base_lr, adam_beta1, adam_beta2, adam_eps, norm_eps
//! u8 strategy (0 wrong-label, 1 masks), u32 blur_iterations (0 for wrong-label)
//! u8 mode (0 unseparated, 1 alternating), u32 awake_period, u32 sleep_period
//!          (both 1 for unseparated)
//! u8 overlay_positives
//! ```
//!
//! Round-trips are bit-exact: parsing validates every redundant field so
//! each valid byte string re-serializes to itself.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::layer::{FFLayer, Hyper};
use crate::negdata::NegStrategy;
use crate::schedule::{PhaseSchedule, TrainConfig};

const MAGIC: &[u8; 5] = b"FFSV1";
const MAX_LAYERS: u32 = 1024;
const MAX_LAYER_ELEMENTS: u64 = 100_000_000;

/// A trained network with the settings needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub layers: Vec<FFLayer<f32>>,
    pub hyper: Hyper,
    pub strategy: NegStrategy,
    pub schedule: PhaseSchedule,
    pub overlay_positives: bool,
}

impl Checkpoint {
    pub fn from_training(layers: Vec<FFLayer<f32>>, config: &TrainConfig) -> Self {
        Checkpoint {
            layers,
            hyper: config.hyper,
            strategy: config.strategy,
            schedule: config.schedule,
            overlay_positives: config.overlay_positives,
        }
    }

    /// Whether goodness voting is a valid evaluator for this network:
    /// training must have overlaid labels on positive batches.
    pub fn supports_voting(&self) -> bool {
        self.overlay_positives
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
            out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
            for &w in layer.weights().iter() {
                out.extend_from_slice(&w.to_le_bytes());
            }
            for &b in layer.bias().iter() {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        for h in [
            self.hyper.threshold,
            self.hyper.base_lr,
            self.hyper.adam_beta1,
            self.hyper.adam_beta2,
            self.hyper.adam_eps,
            self.hyper.norm_eps,
        ] {
            out.extend_from_slice(&(h as f32).to_le_bytes());
        }
        let blur = match self.strategy {
            NegStrategy::WrongLabel => 0u32,
            NegStrategy::Masks { blur_iterations } => blur_iterations,
        };
        out.push(match self.strategy {
            NegStrategy::WrongLabel => 0,
            NegStrategy::Masks { .. } => 1,
        });
        out.extend_from_slice(&blur.to_le_bytes());
        out.push(match self.schedule {
            PhaseSchedule::Unseparated => 0,
            PhaseSchedule::Alternating { .. } => 1,
        });
        out.extend_from_slice(&self.schedule.awake_period().to_le_bytes());
        out.extend_from_slice(&self.schedule.sleep_period().to_le_bytes());
        out.push(u8::from(self.overlay_positives));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(MAGIC.len(), "magic")?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let n_layers = r.u32("layer count")?;
        if n_layers == 0 || n_layers > MAX_LAYERS {
            return Err(Error::Checkpoint(format!(
                "layer count {n_layers} outside 1..={MAX_LAYERS}"
            )));
        }
        let mut layers = Vec::with_capacity(n_layers as usize);
        for i in 0..n_layers {
            let in_dim = r.u32("in_dim")? as usize;
            let out_dim = r.u32("out_dim")? as usize;
            if in_dim == 0 || out_dim == 0 || (in_dim as u64) * (out_dim as u64) > MAX_LAYER_ELEMENTS
            {
                return Err(Error::Checkpoint(format!(
                    "layer {i} has implausible shape {out_dim}x{in_dim}"
                )));
            }
            if let Some(prev) = layers.last() {
                let prev: &FFLayer<f32> = prev;
                if prev.out_dim() != in_dim {
                    return Err(Error::Checkpoint(format!(
                        "layer {i} expects {in_dim} inputs but the previous layer has {} outputs",
                        prev.out_dim()
                    )));
                }
            }
            let weights = r.f32s(in_dim * out_dim, "weights")?;
            let bias = r.f32s(out_dim, "bias")?;
            if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!(
                    "layer {i} contains non-finite parameters"
                )));
            }
            let weights = Array2::from_shape_vec((out_dim, in_dim), weights)
                .expect("length checked by reader");
            let layer = FFLayer::from_parts(weights, Array1::from(bias))
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            layers.push(layer);
        }

        let hyper_vals: Vec<f32> = (0..6)
            .map(|_| r.f32("hyper block"))
            .collect::<Result<_>>()?;
        let hyper = Hyper {
            threshold: f64::from(hyper_vals[0]),
            base_lr: f64::from(hyper_vals[1]),
            adam_beta1: f64::from(hyper_vals[2]),
            adam_beta2: f64::from(hyper_vals[3]),
            adam_eps: f64::from(hyper_vals[4]),
            norm_eps: f64::from(hyper_vals[5]),
        };
        hyper.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

        let strategy_tag = r.u8("strategy")?;
        let blur = r.u32("blur_iterations")?;
        let strategy = match (strategy_tag, blur) {
            (0, 0) => NegStrategy::WrongLabel,
            (0, b) => {
                return Err(Error::Checkpoint(format!(
                    "wrong-label strategy with blur_iterations {b}"
                )))
            }
            (1, b) if b >= 1 => NegStrategy::Masks { blur_iterations: b },
            (1, _) => {
                return Err(Error::Checkpoint(
                    "masks strategy requires blur_iterations >= 1".into(),
                ))
            }
            (t, _) => return Err(Error::Checkpoint(format!("unknown strategy tag {t}"))),
        };

        let mode_tag = r.u8("mode")?;
        let awake = r.u32("awake_period")?;
        let sleep = r.u32("sleep_period")?;
        let schedule = match mode_tag {
            0 if awake == 1 && sleep == 1 => PhaseSchedule::Unseparated,
            0 => {
                return Err(Error::Checkpoint(format!(
                    "unseparated mode with periods {awake}/{sleep}"
                )))
            }
            1 if awake >= 1 && sleep >= 1 => PhaseSchedule::Alternating {
                awake_period: awake,
                sleep_period: sleep,
            },
            1 => {
                return Err(Error::Checkpoint(format!(
                    "alternating periods must be >= 1, got {awake}/{sleep}"
                )))
            }
            t => return Err(Error::Checkpoint(format!("unknown mode tag {t}"))),
        };

        let overlay = match r.u8("overlay_positives")? {
            0 => false,
            1 => true,
            v => {
                return Err(Error::Checkpoint(format!(
                    "overlay_positives flag must be 0 or 1, got {v}"
                )))
            }
        };
        if strategy == NegStrategy::WrongLabel && !overlay {
            return Err(Error::Checkpoint(
                "wrong-label checkpoints must have overlaid positives".into(),
            ));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            layers,
            hyper,
            strategy,
            schedule,
            overlay_positives: overlay,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| {
            Error::Checkpoint(format!("{what}: length overflow"))
        })?;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{what}: file truncated at byte {}",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let raw = self.take(n * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
