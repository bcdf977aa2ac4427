//! Experiment plumbing: configs, the training loop, metrics files,
//! checkpoints, regularization sweeps, diagnostics and verification suites.

mod analysis;
mod checkpoint;
mod config;
mod metrics;
mod sweep;
mod train;
pub mod verify;

pub use analysis::{binarize, diagnose, diagnose_csv, eval_csv, eval_splits, BinarizeOutcome, FINE_TUNE_LR_FACTOR};
pub use checkpoint::Checkpoint;
pub use config::{build_network, Architecture, DatasetConfig, ExperimentConfig, Splits};
pub use metrics::{metrics_csv, timing_csv, MetricsRow};
pub use sweep::{select_best, sweep, SweepPoint, SweepResult, DEFAULT_BETA_GRID};
pub use train::{
    evaluate, run, Evaluation, RunOutput, Trainer, CHECKPOINT_FILE, METRICS_FILE, MOVING_AVERAGES_FILE, TIMING_FILE,
};
