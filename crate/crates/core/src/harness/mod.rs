//! End-to-end evaluation: run both predictors and the fuser over a dataset,
//! collect per-scene metrics, and write reports.

mod config;
mod report;
mod run;
mod sweep;

pub use config::{PredictorKind, RunConfig};
pub use report::{build_report, report_dir, write_report, Report, SUMMARY_BINS};
pub use run::{derive_seed, run, run_dataset, BeliefStep, EpisodeFailure, RunOutput, SampleDigest, Timing, FUSED_LABEL};
pub use sweep::{sweep_eta, SweepOutput, SweepRow};

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::metrics::MetricsError;
use crate::scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("run produced no scenes ({failed} of {episodes} episodes failed)")]
    EmptyRun { episodes: usize, failed: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed records in {path}: {source}")]
    Records { path: PathBuf, source: csv::Error },
}

impl HarnessError {
    /// Whether the failure is the caller's input rather than the run itself.
    pub fn is_validation(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Dataset(_) | Self::Scenario(_))
    }
}
