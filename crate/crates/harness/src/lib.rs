//! Seeded Monte Carlo experiments over the `seqanm` estimators: strict
//! `key=value` configuration, deterministic per-trial random streams,
//! sweeps over pilot or path counts, and CSV plus JSON outputs.

pub mod config;
pub mod experiment;
pub mod output;

mod error;

pub use config::{EstimatorKind, ExperimentConfig, PointConfig, SweepAxis};
pub use error::{HarnessError, Result};
pub use experiment::{run_sweep, run_trial, SweepTable, TrialResult};
