//! Experiment harness: configuration, Monte Carlo trials, metrics and CSV
//! output.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod report;

pub use config::{ExperimentConfig, ReceiverKind, SweepParam};
pub use experiment::{run_single, run_sweep, run_trial, trial_seed, ResultRow, TrialOutcome};
pub use metrics::{compute_der, compute_ser, Metrics};
pub use report::{emit_csv, parse_csv};
