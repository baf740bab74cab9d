//! Multi-predictor fusion of a learned and a rule-hierarchy trajectory predictor.
//!
//! The crate covers the whole evaluation loop: lane geometry and agent data
//! ([`types`], [`dataset`]), temporal-logic rule robustness ([`rules`]),
//! rank-preserving rewards ([`hierarchy`]), the trajectory tree ([`tree`]),
//! predictors ([`predictors`]), the belief fuser ([`fuser`]), metrics
//! ([`metrics`]), synthetic scenarios ([`scenario`]) and the experiment
//! harness ([`harness`]).

pub mod dataset;
pub mod fuser;
pub mod geometry;
pub mod harness;
pub mod hierarchy;
pub mod metrics;
pub mod predictors;
pub mod rules;
pub mod scenario;
pub mod tree;
pub mod types;

pub use dataset::{load_dataset, save_dataset, Dataset, DatasetError};
pub use fuser::{Belief, FuserConfig};
pub use harness::{HarnessError, RunConfig, RunOutput};
pub use predictors::{PredictError, Predictor};
pub use types::{AgentState, Episode, Lane, LaneMap, PredictionScene, Trajectory, TrajectorySamples, ValidationError};
