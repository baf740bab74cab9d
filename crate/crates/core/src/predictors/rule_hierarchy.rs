use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PredictError, Predictor};
use crate::hierarchy::{BranchScores, HierarchyConfig};
use crate::rules::{robustness_vector, RobustnessVector, RuleParams};
use crate::tree::{build_tree, extrapolate_others, select_lane, Branch, TreeConfig};
use crate::types::{PredictionScene, TrajectorySamples};

/// Everything the rule-hierarchy predictor needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhConfig {
    pub tree: TreeConfig,
    pub rules: RuleParams,
    pub hierarchy: HierarchyConfig,
}

/// The scored tree behind one prediction.
#[derive(Debug, Clone)]
pub struct RhDistribution {
    pub lane_id: String,
    pub branches: Vec<Branch>,
    pub robustness: Vec<RobustnessVector>,
    pub scores: BranchScores,
}

/// Plans a trajectory tree along the nearest lane and samples branches from
/// the Boltzmann distribution of their rule-hierarchy rewards.
#[derive(Debug, Clone)]
pub struct RuleHierarchyPredictor {
    label: String,
    config: RhConfig,
}

impl RuleHierarchyPredictor {
    pub fn new(config: RhConfig) -> Self {
        Self::with_label("rh", config)
    }

    pub fn with_label(label: impl Into<String>, config: RhConfig) -> Self {
        Self { label: label.into(), config }
    }

    pub fn config(&self) -> &RhConfig {
        &self.config
    }

    /// Builds and scores the tree for `scene` over `horizon` steps.
    pub fn distribution(&self, scene: &PredictionScene, horizon: u32) -> Result<RhDistribution, PredictError> {
        if scene.map.lanes().is_empty() {
            return Err(PredictError::NoLane);
        }
        let state = scene.target_state();
        let tree_cfg = TreeConfig { horizon, dt: scene.dt, ..self.config.tree.clone() };
        let lane = select_lane(state, &scene.map, tree_cfg.w_theta);
        let branches = build_tree(state, lane, &tree_cfg);
        let others = extrapolate_others(scene, horizon);
        let robustness: Vec<RobustnessVector> = branches
            .par_iter()
            .map(|b| robustness_vector(&b.trajectory, &others, lane, &self.config.rules))
            .collect();
        let scores = BranchScores::score(&robustness, &self.config.hierarchy);
        Ok(RhDistribution { lane_id: lane.id().to_owned(), branches, robustness, scores })
    }
}

impl Predictor for RuleHierarchyPredictor {
    fn label(&self) -> &str {
        &self.label
    }

    fn sample(
        &self,
        scene: &PredictionScene,
        n: usize,
        horizon: u32,
        seed: u64,
    ) -> Result<TrajectorySamples, PredictError> {
        let dist = self.distribution(scene, horizon)?;
        let index = WeightedIndex::new(&dist.scores.probabilities).expect("Boltzmann weights are a valid distribution");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n).map(|_| dist.branches[index.sample(&mut rng)].trajectory.clone()).collect();
        Ok(TrajectorySamples::new(samples, &self.label)?)
    }
}
