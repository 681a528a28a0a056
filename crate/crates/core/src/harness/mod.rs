//! Experiment configuration, batch execution and error metrics.

mod config;
mod experiment;
mod metrics;

pub use config::{ExperimentConfig, EXPERIMENT_FORMAT, EXPERIMENT_VERSION};
pub use experiment::{
    read_trajectories, recompute_report, run_experiment, trajectory_file_name, trial_target, write_outcome,
    ExperimentOutcome, TrialResult, TrialTarget, REPORT_FILE, TRAJECTORY_DIR, TRIALS_FILE,
};
pub use metrics::{acc_at, med_err, AccuracyAt, MetricsReport, DEFAULT_THRESHOLDS_DEG, REPORT_FORMAT, REPORT_VERSION};
