//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {col}: {detail}")]
    Parse {
        row: usize,
        col: usize,
        detail: String,
    },

    #[error("dataset contains no data rows")]
    EmptyDataset,

    #[error("split produces an empty partition (T={len}, fractions {train}/{val}/{test})")]
    SplitTooSmall {
        len: usize,
        train: f64,
        val: f64,
        test: f64,
    },

    #[error("downsampling rate must be at least 1")]
    InvalidRate,

    #[error("series too short: need at least {needed} rows, have {have}")]
    SeriesTooShort { needed: usize, have: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("feature `{feature}` failed on variate `{variate}`: {source}")]
    FeatureContext {
        feature: String,
        variate: String,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate value range: cannot fit quantizer")]
    DegenerateRange,

    #[error("input too short: need at least {needed} values, have {have}")]
    InputTooShort { needed: usize, have: usize },

    #[error("token id {id} out of range for {bins} bins")]
    InvalidToken { id: usize, bins: usize },

    #[error("checkpoint does not match the requested configuration: {0}")]
    CheckpointMismatch(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("LoRA rank {rank} exceeds target dimension {max}")]
    InvalidRank { rank: usize, max: usize },

    #[error("numerical error in {context}")]
    Numerical { context: String },

    #[error("schedule step {step} exceeds total steps {total}")]
    InvalidStep { step: usize, total: usize },

    #[error("horizon mismatch: model predicts {model}, requested {requested}")]
    HorizonMismatch { model: usize, requested: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no prompt available for dataset `{0}`")]
    MissingPrompt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap a feature-extraction failure with the offending feature/variate pair.
    pub fn in_feature(self, feature: &str, variate: &str) -> Error {
        Error::FeatureContext {
            feature: feature.to_string(),
            variate: variate.to_string(),
            source: Box::new(self),
        }
    }
}
