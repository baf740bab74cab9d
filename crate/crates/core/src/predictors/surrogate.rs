use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{PredictError, Predictor};
use crate::types::{AgentState, PredictionScene, Trajectory, TrajectorySamples};

/// Behaviour modes of the kinematic mixture, in weight order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ConstantVelocity,
    Decelerate,
    TurnLeft,
    TurnRight,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::ConstantVelocity, Mode::Decelerate, Mode::TurnLeft, Mode::TurnRight];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicMixtureConfig {
    /// Probabilities of constant-velocity, decelerate, turn-left and turn-right.
    pub mode_weights: [f64; 4],
    /// Per-step acceleration noise, m/s².
    pub accel_noise_std: f64,
    /// Per-step yaw-rate noise, rad/s.
    pub yawrate_noise_std: f64,
    /// Braking rate of the decelerate mode, m/s².
    pub decel: f64,
    /// Yaw rate magnitude of the turn modes, rad/s.
    pub turn_yaw_rate: f64,
}

impl Default for KinematicMixtureConfig {
    fn default() -> Self {
        Self {
            mode_weights: [0.4, 0.2, 0.2, 0.2],
            accel_noise_std: 0.5,
            yawrate_noise_std: 0.05,
            decel: 2.0,
            turn_yaw_rate: 0.15,
        }
    }
}

impl KinematicMixtureConfig {
    pub fn validate(&self) -> Result<(), String> {
        let sum: f64 = self.mode_weights.iter().sum();
        if self.mode_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(format!("surrogate.mode_weights must be a probability vector, got {:?}", self.mode_weights));
        }
        for (name, v) in [
            ("accel_noise_std", self.accel_noise_std),
            ("yawrate_noise_std", self.yawrate_noise_std),
            ("decel", self.decel),
            ("turn_yaw_rate", self.turn_yaw_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("surrogate.{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    fn controls(&self, mode: Mode) -> (f64, f64) {
        match mode {
            Mode::ConstantVelocity => (0.0, 0.0),
            Mode::Decelerate => (-self.decel, 0.0),
            Mode::TurnLeft => (0.0, self.turn_yaw_rate),
            Mode::TurnRight => (0.0, -self.turn_yaw_rate),
        }
    }
}

/// Multimodal unicycle rollouts from the last observed state; stands in for a
/// learned generative predictor.
#[derive(Debug, Clone)]
pub struct KinematicSurrogate {
    label: String,
    config: KinematicMixtureConfig,
}

impl KinematicSurrogate {
    pub fn new(config: KinematicMixtureConfig) -> Self {
        Self::with_label("surrogate", config)
    }

    pub fn with_label(label: impl Into<String>, config: KinematicMixtureConfig) -> Self {
        Self { label: label.into(), config }
    }

    /// One rollout in a fixed mode, drawing noise from `rng`.
    pub fn rollout(&self, start: &AgentState, mode: Mode, horizon: u32, dt: f64, rng: &mut ChaCha8Rng) -> Trajectory {
        let accel_noise = Normal::new(0.0, self.config.accel_noise_std).expect("validated std");
        let yaw_noise = Normal::new(0.0, self.config.yawrate_noise_std).expect("validated std");
        let (accel, yaw_rate) = self.config.controls(mode);
        let (mut x, mut y, mut heading, mut speed) = (start.x, start.y, start.heading, start.speed);
        let states = (1..=horizon)
            .map(|k| {
                speed = (speed + (accel + accel_noise.sample(rng)) * dt).max(0.0);
                heading += (yaw_rate + yaw_noise.sample(rng)) * dt;
                x += speed * heading.cos() * dt;
                y += speed * heading.sin() * dt;
                AgentState::new(x, y, heading, speed, start.t + k)
            })
            .collect();
        Trajectory::new(states, dt).expect("rollout steps are contiguous")
    }

    pub fn sample_modes(
        &self,
        scene: &PredictionScene,
        n: usize,
        horizon: u32,
        seed: u64,
    ) -> Result<Vec<(Mode, Trajectory)>, PredictError> {
        let start = scene.target_state();
        let modes = WeightedIndex::new(self.config.mode_weights)
            .map_err(|e| PredictError::Config(format!("mode weights: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n)
            .map(|_| {
                let mode = Mode::ALL[modes.sample(&mut rng)];
                (mode, self.rollout(start, mode, horizon, scene.dt, &mut rng))
            })
            .collect())
    }
}

impl Predictor for KinematicSurrogate {
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
        let samples = self.sample_modes(scene, n, horizon, seed)?.into_iter().map(|(_, t)| t).collect();
        Ok(TrajectorySamples::new(samples, &self.label)?)
    }
}
