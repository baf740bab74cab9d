//! Belief over two predictors, updated from one-step-ahead evidence, and the
//! sampler that mixes their samples accordingly.

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AgentState, TrajectorySamples, ValidationError};

#[derive(Debug, Error, PartialEq)]
pub enum FuserError {
    #[error("likelihood ratio must be finite and positive, got {0}")]
    BadRatio(f64),
    #[error("no one-step predictions to compare against")]
    NoPredictions,
    #[error("cannot take {wanted} samples from `{label}`, it has {available}")]
    TooFewSamples { label: String, wanted: usize, available: usize },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Probability mass on the learned (`b_l`) and rule-based (`b_r`) predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BeliefRecord", into = "BeliefRecord")]
pub struct Belief {
    b_l: f64,
    b_r: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeliefRecord {
    b_l: f64,
    b_r: f64,
}

impl TryFrom<BeliefRecord> for Belief {
    type Error = String;

    fn try_from(r: BeliefRecord) -> Result<Self, String> {
        if !(r.b_l >= 0.0 && r.b_r >= 0.0 && (r.b_l + r.b_r - 1.0).abs() <= 1e-12) {
            return Err(format!("belief ({}, {}) is not a probability vector", r.b_l, r.b_r));
        }
        Ok(Belief { b_l: r.b_l, b_r: r.b_r })
    }
}

impl From<Belief> for BeliefRecord {
    fn from(b: Belief) -> Self {
        BeliefRecord { b_l: b.b_l, b_r: b.b_r }
    }
}

impl Belief {
    pub const UNIFORM: Belief = Belief { b_l: 0.5, b_r: 0.5 };

    /// Belief putting `b_l` on the learned predictor.
    ///
    /// # Panics
    /// If `b_l` is outside `[0, 1]`.
    pub fn new(b_l: f64) -> Self {
        assert!((0.0..=1.0).contains(&b_l), "belief mass {b_l} outside [0, 1]");
        Self { b_l, b_r: 1.0 - b_l }
    }

    pub fn learned(&self) -> f64 {
        self.b_l
    }

    pub fn rule(&self) -> f64 {
        self.b_r
    }

    #[cfg(test)]
    fn min(&self) -> f64 {
        self.b_l.min(self.b_r)
    }
}

impl Default for Belief {
    fn default() -> Self {
        Self::UNIFORM
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuserConfig {
    /// Learning rate in (0, 1].
    pub eta: f64,
    /// Per-step switching probability in (0, 1).
    pub gamma: f64,
    pub b0: Belief,
    /// Sharpness of the performance metric, 1/m.
    pub lambda: f64,
}

impl Default for FuserConfig {
    fn default() -> Self {
        Self { eta: 0.1, gamma: 0.02, b0: Belief::UNIFORM, lambda: 1.0 }
    }
}

impl FuserConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(format!("fuser.eta must lie in (0, 1], got {}", self.eta));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("fuser.gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(format!("fuser.lambda must be positive, got {}", self.lambda));
        }
        Ok(())
    }
}

fn min_distance(one_step: &[AgentState], observed: &AgentState) -> Result<f64, FuserError> {
    let obs = observed.position();
    one_step
        .iter()
        .map(|s| s.position().distance(obs))
        .min_by(f64::total_cmp)
        .ok_or(FuserError::NoPredictions)
}

/// `exp(-lambda * min_i |pred_i - observed|)`.
pub fn perf_metric(one_step: &[AgentState], observed: &AgentState, lambda: f64) -> Result<f64, FuserError> {
    Ok((-lambda * min_distance(one_step, observed)?).exp())
}

/// Natural log of [`perf_metric`], which does not underflow for far-off predictions.
pub fn log_perf_metric(one_step: &[AgentState], observed: &AgentState, lambda: f64) -> Result<f64, FuserError> {
    Ok(-lambda * min_distance(one_step, observed)?)
}

pub fn likelihood_ratio(gamma_l: f64, gamma_r: f64, b: &Belief) -> f64 {
    (gamma_l * b.b_l) / (gamma_r * b.b_r)
}

pub fn log_likelihood_ratio(ln_gamma_l: f64, ln_gamma_r: f64, b: &Belief) -> f64 {
    ln_gamma_l - ln_gamma_r + b.b_l.ln() - b.b_r.ln()
}

fn mix(p_l: f64, p_r: f64, cfg: &FuserConfig) -> Belief {
    let g = cfg.gamma;
    let b_l = (1.0 - g) * p_l + g * cfg.b0.b_l;
    let b_r = (1.0 - g) * p_r + g * cfg.b0.b_r;
    // Renormalize away rounding so the simplex holds to the last ulp.
    let s = b_l + b_r;
    Belief { b_l: b_l / s, b_r: b_r / s }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        z.exp() / (1.0 + z.exp())
    }
}

/// Tempered update followed by mixing with the prior:
/// `b = (1 - gamma) [a/(1+a), 1/(1+a)] + gamma b0` with `a = alpha^eta`.
pub fn belief_update(alpha: f64, cfg: &FuserConfig) -> Result<Belief, FuserError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(FuserError::BadRatio(alpha));
    }
    belief_update_log(alpha.ln(), cfg)
}

/// [`belief_update`] taking `ln alpha`.
pub fn belief_update_log(ln_alpha: f64, cfg: &FuserConfig) -> Result<Belief, FuserError> {
    if !ln_alpha.is_finite() {
        return Err(FuserError::BadRatio(ln_alpha.exp()));
    }
    let z = cfg.eta * ln_alpha;
    Ok(mix(sigmoid(z), sigmoid(-z), cfg))
}

/// Splits `n` draws between the predictors by independent Bernoulli(`b_l`) trials.
pub fn belief_sample_counts(b: &Belief, n: usize, seed: u64) -> (usize, usize) {
    let coin = Bernoulli::new(b.b_l.clamp(0.0, 1.0)).expect("clamped probability");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_l = (0..n).filter(|_| coin.sample(&mut rng)).count();
    (n_l, n - n_l)
}

/// First `n_l` learned samples followed by the first `n_r` rule-based ones.
pub fn fuse(
    learned: &TrajectorySamples,
    rule: &TrajectorySamples,
    n_l: usize,
    n_r: usize,
    label: &str,
) -> Result<TrajectorySamples, FuserError> {
    for (s, wanted) in [(learned, n_l), (rule, n_r)] {
        if s.len() < wanted {
            return Err(FuserError::TooFewSamples { label: s.label().to_owned(), wanted, available: s.len() });
        }
    }
    let picked = learned.samples()[..n_l].iter().chain(&rule.samples()[..n_r]).cloned().collect();
    Ok(TrajectorySamples::new(picked, label)?)
}
