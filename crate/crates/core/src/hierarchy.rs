//! Rule-hierarchy ranking, the rank-preserving reward and the Boltzmann
//! distribution over candidate branches.
//!
//! For a hierarchy of `n` rules the reward is
//!
//! ```text
//! R(ρ) = Σ_i ( a^(n-i+1) · step(ρ_i) + ρ_i / n ),   step(x) = 1 if x ≥ 0 else 0
//! ```
//!
//! with `a > 2` and every `ρ_i` clamped to `[-1, 1]`, which guarantees that a
//! better-ranked trajectory always earns a strictly larger reward.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rules::RobustnessVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    /// Base of the reward powers; must exceed 2.
    pub reward_base: f64,
    /// Boltzmann temperature.
    pub zeta: f64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self { reward_base: 4.0, zeta: 1.0 }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.reward_base.is_finite() && self.reward_base > 2.0) {
            return Err(format!("hierarchy.reward_base must exceed 2, got {}", self.reward_base));
        }
        if !(self.zeta.is_finite() && self.zeta > 0.0) {
            return Err(format!("hierarchy.zeta must be positive, got {}", self.zeta));
        }
        Ok(())
    }
}

fn step(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Rank in `1..=2^n`: 1 when every rule holds, and each violated rule `i`
/// (1-based) adds `2^(n-i)`.
pub fn rank(rho: &RobustnessVector) -> u64 {
    let n = rho.len();
    1 + rho
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .map(|(i, _)| 1u64 << (n - 1 - i))
        .sum::<u64>()
}

/// Rank-preserving reward of a robustness vector.
pub fn reward(rho: &RobustnessVector, reward_base: f64) -> f64 {
    let n = rho.len();
    let inv_n = 1.0 / n as f64;
    rho.values()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let r = r.clamp(-1.0, 1.0);
            reward_base.powi((n - i) as i32) * step(r) + inv_n * r
        })
        .sum()
}

/// Rewards of many branches, scored in parallel.
pub fn rewards(rhos: &[RobustnessVector], reward_base: f64) -> Vec<f64> {
    rhos.par_iter().map(|r| reward(r, reward_base)).collect()
}

/// `p_i ∝ exp(R_i / ζ)`, computed with max subtraction.
pub fn boltzmann(rewards: &[f64], zeta: f64) -> Vec<f64> {
    assert!(!rewards.is_empty(), "boltzmann needs at least one reward");
    let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = rewards.iter().map(|r| ((r - max) / zeta).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Rewards together with their Boltzmann probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchScores {
    pub rewards: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl BranchScores {
    pub fn score(rhos: &[RobustnessVector], cfg: &HierarchyConfig) -> Self {
        let rewards = rewards(rhos, cfg.reward_base);
        let probabilities = boltzmann(&rewards, cfg.zeta);
        Self { rewards, probabilities }
    }

    /// Index of the highest reward; the earliest wins ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, r) in self.rewards.iter().enumerate() {
            if *r > self.rewards[best] {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rv(v: &[f64]) -> RobustnessVector {
        RobustnessVector::new(v.to_vec())
    }

    #[test]
    fn two_rule_ranks() {
        assert_eq!(rank(&rv(&[0.1, 0.1])), 1);
        assert_eq!(rank(&rv(&[0.1, -0.1])), 2);
        assert_eq!(rank(&rv(&[-0.1, 0.1])), 3);
        assert_eq!(rank(&rv(&[-0.1, -0.1])), 4);
    }

    #[test]
    fn reward_examples() {
        assert_abs_diff_eq!(reward(&rv(&[1.0, -1.0]), 4.0), 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(reward(&rv(&[0.5, 0.2, -0.1, 0.3]), 4.0), 324.225, epsilon = 1e-12);
        assert_abs_diff_eq!(reward(&rv(&[0.0]), 4.0), 4.0);
    }

    #[test]
    fn reward_clamps_large_robustness() {
        assert_abs_diff_eq!(reward(&rv(&[5e5, 1.0]), 4.0), reward(&rv(&[1.0, 1.0]), 4.0));
    }

    #[test]
    fn boltzmann_examples() {
        assert_eq!(boltzmann(&[1.0, 1.0], 0.3), vec![0.5, 0.5]);
        let p = boltzmann(&[2.0, 0.0], 1.0);
        let e2 = 2f64.exp();
        assert_abs_diff_eq!(p[0], e2 / (e2 + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 0.88080, epsilon = 5e-6);
        assert!(boltzmann(&[10.0, 0.0], 0.01)[0] >= 1.0 - 1e-9);
        // No overflow at the top of the reward range.
        let p = boltzmann(&[340.0, 339.0], 0.01);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn best_prefers_earliest() {
        let s = BranchScores { rewards: vec![1.0, 3.0, 3.0], probabilities: vec![] };
        assert_eq!(s.best(), 1);
    }

    fn bounded_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0..=1.0f64, n)
    }

    proptest! {
        #[test]
        fn equal_rank_reward_increases_with_robustness(v in bounded_vector(4), i in 0usize..4, bump in 1e-6..0.5f64) {
            let mut w = v.clone();
            // Stay on the same side of zero and inside the clamp range.
            let room = if v[i] < 0.0 { (-1e-9 - v[i]).max(0.0) } else { 1.0 - v[i] };
            prop_assume!(room > 1e-6);
            w[i] += bump.min(room);
            prop_assert_eq!(rank(&rv(&v)), rank(&rv(&w)));
            prop_assert!(reward(&rv(&w), 4.0) > reward(&rv(&v), 4.0));
        }

        #[test]
        fn boltzmann_shift_invariant(r in prop::collection::vec(-300.0..300.0f64, 1..12), c in -100.0..100.0f64, zeta in 0.05..5.0f64) {
            let shifted: Vec<f64> = r.iter().map(|x| x + c).collect();
            let a = boltzmann(&r, zeta);
            let b = boltzmann(&shifted, zeta);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
