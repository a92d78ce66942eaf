//! Evaluation harness: MSE/MAE metrics over the horizon grid, experiment
//! protocols (standard, few-shot, zero-shot, diversity sweep), and report
//! rendering with best/second-best marking.

mod predictor;
mod protocol;
mod table;

pub use predictor::{evaluate_series, BackbonePredictor, DirectLinear, Persistence, Predictor};
pub use protocol::{
    build_prompt_store, evaluate_backbone, prepare, run_diversity_sweep, run_experiment,
    run_few_shot, run_standard, run_zero_shot, run_zero_shot_protocol, train_for_horizon,
    AuditEntry, CheckpointSet, DatasetSource, ExperimentMode, ExperimentSpec, ModelSettings,
    ParadigmChoice, PreparedDataset, PromptMode, ProtocolOutput, TokenizerChoice, TrainArtifact,
    TrainRecipe, ZeroShotOutcome,
};
pub use table::{mae, render_report, MetricTable, RowKey};

/// Mean squared error (same contract as [`crate::trainer::mse_loss`]).
pub use crate::trainer::mse_loss as mse;
