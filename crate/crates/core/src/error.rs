use std::fmt;

/// Phase of a Forward-Forward training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Positive,
    Negative,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Positive => write!(f, "pos"),
            Phase::Negative => write!(f, "neg"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A malformed IDX file; `field` names the header word or payload
    /// section that failed validation.
    #[error("idx parse error in {field}: {detail}")]
    IdxParse { field: &'static str, detail: String },

    /// Image and label files that do not describe the same number of items.
    #[error("image/label pairing error: {images} images but {labels} labels")]
    Pairing { images: usize, labels: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A non-finite value surfaced in the numerical core. The schedule
    /// wraps this with layer/step context before it reaches a caller.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// Training aborted because a gradient or updated weight went NaN/Inf.
    #[error("training fault at layer {layer}, step {step}, {phase} phase: {source}")]
    TrainingFault {
        layer: usize,
        step: u64,
        phase: Phase,
        source: Box<Error>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Evaluator incompatible with the mode a checkpoint was trained in.
    #[error("evaluator mismatch: {detail}")]
    EvaluatorMismatch { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
