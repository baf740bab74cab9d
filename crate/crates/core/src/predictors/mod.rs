//! Sample-based trajectory predictors behind one interface.

mod external;
mod rule_hierarchy;
mod surrogate;

pub use external::{ExternalConfig, ExternalPredictor};
pub use rule_hierarchy::{RhConfig, RhDistribution, RuleHierarchyPredictor};
pub use surrogate::{KinematicMixtureConfig, KinematicSurrogate, Mode};

use thiserror::Error;

use crate::types::{PredictionScene, TrajectorySamples, ValidationError};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("scene map has no lane to follow")]
    NoLane,
    #[error("invalid predictor configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("external predictor I/O failure: {reason}")]
    Io { reason: String, payload: String },
    #[error("external predictor timed out after {seconds} s")]
    Timeout { seconds: f64, payload: String },
    #[error("external predictor protocol violation: {reason}")]
    Protocol { reason: String, payload: String },
}

impl PredictError {
    /// Raw bytes received from an external predictor, when the error came from one.
    pub fn payload(&self) -> Option<&str> {
        match self {
            Self::Io { payload, .. } | Self::Timeout { payload, .. } | Self::Protocol { payload, .. } => Some(payload),
            _ => None,
        }
    }
}

/// A stochastic predictor of the target agent's future.
///
/// `sample` must be a pure function of `(scene, n, horizon, seed)`: the same
/// inputs always give the same samples. Samples are i.i.d. draws, cover steps
/// `scene.t + 1 ..= scene.t + horizon`, and share the scene's `dt`.
pub trait Predictor: Send + Sync {
    fn label(&self) -> &str;

    fn sample(
        &self,
        scene: &PredictionScene,
        n: usize,
        horizon: u32,
        seed: u64,
    ) -> Result<TrajectorySamples, PredictError>;
}
