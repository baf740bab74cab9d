//! Robustness of the four driving rules, most important first:
//! collision avoidance, lane following, orientation along the lane, speed limit.
//!
//! Every rule is an "always" formula, so its robustness is the minimum over the
//! horizon of a per-step margin. A value is non-negative exactly when the rule holds.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::geometry::wrap_angle;
use crate::types::{Lane, PredictionScene, Trajectory};

/// Rule thresholds and normalization scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleParams {
    /// Minimum center-to-center distance to any other agent, meters.
    pub d_safe: f64,
    /// Half-width of the lane-following corridor, meters.
    pub lat_max: f64,
    /// Largest tolerated heading error against the lane tangent, radians.
    pub theta_max: f64,
    /// Scale that maps the speed margin to O(1), m/s.
    pub v_margin_ref: f64,
    /// Collision robustness reported when there is nobody to collide with.
    pub collision_cap: f64,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self { d_safe: 2.0, lat_max: 1.75, theta_max: FRAC_PI_4, v_margin_ref: 5.0, collision_cap: 1e6 }
    }
}

impl RuleParams {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("d_safe", self.d_safe),
            ("lat_max", self.lat_max),
            ("theta_max", self.theta_max),
            ("v_margin_ref", self.v_margin_ref),
            ("collision_cap", self.collision_cap),
        ];
        match fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, v)) => Err(format!("rules.{name} must be positive, got {v}")),
            None => Ok(()),
        }
    }
}

/// Per-rule robustness values ordered by decreasing importance.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessVector(Vec<f64>);

impl RobustnessVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()), "non-finite robustness {values:?}");
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for RobustnessVector {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

/// `min_t min_j (|p_t - q_{j,t}| - d_safe)` over steps shared with each other agent,
/// or `cap` if no other agent overlaps the trajectory in time.
pub fn rob_collision(traj: &Trajectory, others: &[Trajectory], d_safe: f64, cap: f64) -> f64 {
    let mut worst = f64::INFINITY;
    for other in others {
        for s in traj.states() {
            if let Some(o) = other.at(s.t) {
                worst = worst.min(s.position().distance(o.position()) - d_safe);
            }
        }
    }
    if worst.is_finite() {
        worst.min(cap)
    } else {
        cap
    }
}

/// `min_t (lat_max - |lateral offset from the lane centerline|)`.
pub fn rob_lane_follow(traj: &Trajectory, lane: &Lane, lat_max: f64) -> f64 {
    traj.states()
        .iter()
        .map(|s| lat_max - lane.project(s.position()).lateral_offset.abs())
        .fold(f64::INFINITY, f64::min)
}

/// `min_t (theta_max - |wrap(heading - lane tangent)|)`.
pub fn rob_orientation(traj: &Trajectory, lane: &Lane, theta_max: f64) -> f64 {
    traj.states()
        .iter()
        .map(|s| theta_max - wrap_angle(s.heading - lane.project(s.position()).tangent_heading).abs())
        .fold(f64::INFINITY, f64::min)
}

/// `min_t (v_limit - speed_t)`.
pub fn rob_speed(traj: &Trajectory, v_limit: f64) -> f64 {
    traj.states().iter().map(|s| v_limit - s.speed).fold(f64::INFINITY, f64::min)
}

/// Normalized robustness of all four rules against explicit other-agent futures.
///
/// Each component is divided by its scale (`d_safe`, `lat_max`, `theta_max`,
/// `v_margin_ref`) so that they are commensurable; clamping happens in the reward.
pub fn robustness_vector(traj: &Trajectory, others: &[Trajectory], lane: &Lane, params: &RuleParams) -> RobustnessVector {
    RobustnessVector::new(vec![
        rob_collision(traj, others, params.d_safe, params.collision_cap) / params.d_safe,
        rob_lane_follow(traj, lane, params.lat_max) / params.lat_max,
        rob_orientation(traj, lane, params.theta_max) / params.theta_max,
        rob_speed(traj, lane.speed_limit()) / params.v_margin_ref,
    ])
}

/// As [`robustness_vector`], extrapolating the other agents of `scene` at constant velocity.
pub fn robustness_vector_in_scene(
    traj: &Trajectory,
    scene: &PredictionScene,
    lane: &Lane,
    params: &RuleParams,
) -> RobustnessVector {
    let others = crate::tree::extrapolate_others(scene, traj.len() as u32);
    robustness_vector(traj, &others, lane, params)
}
