//! Lane selection and the spline trajectory tree.
//!
//! The tree is a fan of `|lateral_offsets| × |speed_fractions|` branches rooted
//! at the agent's current pose. Each branch is a cubic Hermite curve in time
//! from the current pose and velocity to a terminal pose on (or beside) the
//! selected lane, reached after travelling the distance implied by a speed
//! profile that is linear in time.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Point};
use crate::types::{AgentState, Lane, LaneMap, PredictionScene, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    /// Terminal lateral targets relative to the lane centerline, meters (left positive).
    pub lateral_offsets: Vec<f64>,
    /// Terminal speeds as fractions of the lane speed limit.
    pub terminal_speed_fractions: Vec<f64>,
    /// Branch length in steps.
    pub horizon: u32,
    /// Step length, seconds.
    pub dt: f64,
    /// Weight of heading misalignment in lane selection, meters per radian.
    pub w_theta: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            lateral_offsets: vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            terminal_speed_fractions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            horizon: 8,
            dt: 0.5,
            w_theta: 2.0,
        }
    }
}

impl TreeConfig {
    pub fn branch_count(&self) -> usize {
        self.lateral_offsets.len() * self.terminal_speed_fractions.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.branch_count() == 0 {
            return Err("tree needs at least one lateral offset and one speed fraction".into());
        }
        if self.horizon == 0 {
            return Err("tree.horizon must be at least 1".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(format!("tree.dt must be positive, got {}", self.dt));
        }
        if !(self.w_theta.is_finite() && self.w_theta >= 0.0) {
            return Err(format!("tree.w_theta must be non-negative, got {}", self.w_theta));
        }
        let bad = |v: &f64| !v.is_finite();
        if self.lateral_offsets.iter().any(bad) || self.terminal_speed_fractions.iter().any(|f| bad(f) || *f < 0.0) {
            return Err("tree offsets must be finite and speed fractions finite and non-negative".into());
        }
        Ok(())
    }
}

/// Lane minimizing `|lateral offset| + w_theta · |heading error|` at the agent's
/// projection. Lanes are visited in id order and only a strictly lower cost
/// replaces the incumbent, so ties resolve to the smallest id.
pub fn select_lane<'a>(state: &AgentState, map: &'a LaneMap, w_theta: f64) -> &'a Lane {
    let mut lanes: Vec<&Lane> = map.lanes().iter().collect();
    lanes.sort_by(|a, b| a.id().cmp(b.id()));
    let mut best: Option<(f64, &Lane)> = None;
    for lane in lanes {
        let proj = lane.project(state.position());
        let cost = proj.lateral_offset.abs() + w_theta * wrap_angle(state.heading - proj.tangent_heading).abs();
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, lane));
        }
    }
    best.expect("lane map is non-empty").1
}

/// Cubic Hermite curve parametrized by normalized time `u ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteCurve {
    pub p0: Point,
    pub m0: Point,
    pub p1: Point,
    pub m1: Point,
}

impl HermiteCurve {
    pub fn position(&self, u: f64) -> Point {
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        self.p0 * h00 + self.m0 * h10 + self.p1 * h01 + self.m1 * h11
    }

    /// Derivative with respect to `u`.
    pub fn derivative(&self, u: f64) -> Point {
        let u2 = u * u;
        let d00 = 6.0 * u2 - 6.0 * u;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = -6.0 * u2 + 6.0 * u;
        let d11 = 3.0 * u2 - 2.0 * u;
        self.p0 * d00 + self.m0 * d10 + self.p1 * d01 + self.m1 * d11
    }
}

/// One candidate future.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub lateral_offset: f64,
    pub speed_fraction: f64,
    pub curve: HermiteCurve,
    /// Steps `t+1..=t+horizon`; speeds are finite differences of the positions.
    pub trajectory: Trajectory,
}

/// Builds the fan of branches from `state` along `lane`.
///
/// If the travel distance runs past the end of the lane, the terminal pose is
/// clamped to the lane end with the last segment's heading.
pub fn build_tree(state: &AgentState, lane: &Lane, cfg: &TreeConfig) -> Vec<Branch> {
    let origin = state.position();
    let duration = cfg.horizon as f64 * cfg.dt;
    let s0 = lane.project(origin).arc_length;
    let start_velocity = Point::from_heading(state.heading) * state.speed;
    let mut branches = Vec::with_capacity(cfg.branch_count());
    for &offset in &cfg.lateral_offsets {
        for &fraction in &cfg.terminal_speed_fractions {
            let terminal_speed = fraction * lane.speed_limit();
            let travel = 0.5 * (state.speed + terminal_speed) * duration;
            let (center, tangent) = lane.point_at((s0 + travel).min(lane.length()));
            let dir = Point::from_heading(tangent);
            let curve = HermiteCurve {
                p0: origin,
                m0: start_velocity * duration,
                p1: center + dir.perp() * offset,
                m1: dir * (terminal_speed * duration),
            };
            branches.push(Branch {
                lateral_offset: offset,
                speed_fraction: fraction,
                curve,
                trajectory: sample_curve(&curve, state, tangent, cfg.horizon, cfg.dt),
            });
        }
    }
    branches
}

fn sample_curve(curve: &HermiteCurve, root: &AgentState, end_heading: f64, horizon: u32, dt: f64) -> Trajectory {
    let mut prev_pos = root.position();
    let states = (1..=horizon)
        .map(|k| {
            let u = k as f64 / horizon as f64;
            let pos = curve.position(u);
            let d = curve.derivative(u);
            // A stopping branch has zero velocity at its end; face along the lane there.
            let heading = if d.norm() > 1e-9 { d.heading() } else { end_heading };
            let speed = pos.distance(prev_pos) / dt;
            prev_pos = pos;
            AgentState::new(pos.x, pos.y, heading, speed, root.t + k)
        })
        .collect();
    Trajectory::new(states, dt).expect("branch steps are contiguous")
}

/// Straight-line future of `state` at its current speed and heading, steps `t+1..=t+horizon`.
pub fn extrapolate_constant_velocity(state: &AgentState, horizon: u32, dt: f64) -> Trajectory {
    let v = Point::from_heading(state.heading) * state.speed;
    let states = (1..=horizon)
        .map(|k| {
            let p = state.position() + v * (k as f64 * dt);
            AgentState::new(p.x, p.y, state.heading, state.speed, state.t + k)
        })
        .collect();
    Trajectory::new(states, dt).expect("extrapolation steps are contiguous")
}

/// Constant-velocity futures of every non-target agent present at the scene step.
pub fn extrapolate_others(scene: &PredictionScene, horizon: u32) -> Vec<Trajectory> {
    scene
        .other_states()
        .map(|(_, s)| extrapolate_constant_velocity(s, horizon, scene.dt))
        .collect()
}
