//! Training engine for layer-local "goodness" networks with separated
//! positive and negative phases.
//!
//! The crate is organized bottom-up: [`data`] loads image datasets and
//! serves deterministic batch streams, [`negdata`] synthesizes negative
//! samples, [`loss`] holds the scalar math, [`layer`] implements one
//! fully connected layer with local updates, [`schedule`] drives phase
//! scheduling and greedy layer-wise training, [`eval`] scores trained
//! networks, and [`checkpoint`] persists them.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod layer;
pub mod loss;
pub mod negdata;
pub mod schedule;

pub use checkpoint::Checkpoint;
pub use data::{Batch, BatchStream, Dataset, DatasetName, Sample, Split};
pub use error::{Error, Phase, Result};
pub use eval::{EvalOptions, Evaluator};
pub use layer::{FFLayer, Hyper};
pub use negdata::NegStrategy;
pub use schedule::{PhaseSchedule, Seeds, TrainConfig, TrainLog};
