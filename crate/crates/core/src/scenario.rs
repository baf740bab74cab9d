//! Synthetic episodes on a small road network: a straight road, a left turn, a
//! fork and a speeding agent.
//!
//! Every scenario kind lives in its own region of one shared map, so a whole
//! suite fits in a single dataset file. Agents drive in lane coordinates
//! (arc length, lateral offset, heading relative to the lane) under a
//! stabilizing controller with Gaussian acceleration and yaw-rate noise.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::geometry::{wrap_angle, Point};
use crate::types::{AgentState, Episode, Lane, LaneMap, Trajectory, ValidationError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Spec(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Straight,
    Turn,
    Fork,
    Violator,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [Self::Straight, Self::Turn, Self::Fork, Self::Violator];

    pub fn name(self) -> &'static str {
        match self {
            Self::Straight => "straight",
            Self::Turn => "turn",
            Self::Fork => "fork",
            Self::Violator => "violator",
        }
    }

    /// Kind encoded in an episode id produced by [`generate`].
    pub fn of_episode(id: &str) -> Option<ScenarioKind> {
        let prefix = id.split('-').next()?;
        Self::ALL.into_iter().find(|k| k.name() == prefix)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const STRAIGHT_LANE: &str = "straight";
pub const TURN_LANE: &str = "turn";
pub const FORK_LEFT_LANE: &str = "fork.left";
pub const FORK_RIGHT_LANE: &str = "fork.right";

const TURN_ORIGIN: Point = Point { x: 0.0, y: 1000.0 };
const FORK_ORIGIN: Point = Point { x: 0.0, y: 3000.0 };
const STRAIGHT_LENGTH: f64 = 1000.0;
const TURN_ENTRY: f64 = 60.0;
const FORK_ENTRY: f64 = 100.0;
const FORK_BLEND_RADIUS: f64 = 25.0;
const EXIT_LENGTH: f64 = 600.0;
const ARC_STEP: f64 = 2.0 * std::f64::consts::PI / 180.0;

/// Geometry and behaviour shared by every scenario kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub episode_length: u32,
    pub dt: f64,
    pub speed_limit: f64,
    pub turn_radius: f64,
    /// Divergence of each fork branch from the entry direction.
    pub fork_angle_deg: f64,
    pub violator_speed_factor: f64,
    /// Agents trailing the target in its lane, about 10 m apart.
    pub background_agents: u32,
    pub accel_noise_std: f64,
    pub yawrate_noise_std: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            episode_length: 30,
            dt: 0.5,
            speed_limit: 10.0,
            turn_radius: 40.0,
            fork_angle_deg: 30.0,
            violator_speed_factor: 1.5,
            background_agents: 1,
            accel_noise_std: 0.1,
            yawrate_noise_std: 0.01,
        }
    }
}

/// Smallest episode that still yields a scene with the default history and horizon.
pub const MIN_EPISODE_LENGTH: u32 = 4 + 8 + 1;

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Spec(m));
        if self.episode_length < MIN_EPISODE_LENGTH {
            return bad(format!("episode_length must be at least {MIN_EPISODE_LENGTH}, got {}", self.episode_length));
        }
        for (name, v) in [
            ("dt", self.dt),
            ("speed_limit", self.speed_limit),
            ("turn_radius", self.turn_radius),
            ("violator_speed_factor", self.violator_speed_factor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.fork_angle_deg > 0.0 && self.fork_angle_deg < 90.0) {
            return bad(format!("fork_angle_deg must lie in (0, 90), got {}", self.fork_angle_deg));
        }
        for (name, v) in [("accel_noise_std", self.accel_noise_std), ("yawrate_noise_std", self.yawrate_noise_std)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.background_agents > 5 {
            return bad(format!("at most 5 background agents are supported, got {}", self.background_agents));
        }
        let fastest = self.speed_limit * self.violator_speed_factor.max(1.0) * 1.2;
        let travel = fastest * self.dt * self.episode_length as f64;
        if travel > EXIT_LENGTH {
            return bad(format!("episodes of {} steps run off the map", self.episode_length));
        }
        Ok(())
    }
}

/// One batch of episodes of a single kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    #[serde(default = "one")]
    pub episodes: usize,
    #[serde(default)]
    pub params: ScenarioParams,
}

fn one() -> usize {
    1
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self { kind, seed, episodes: 1, params: ScenarioParams::default() }
    }
}

/// Lanes of every region, in id order.
pub fn build_map(params: &ScenarioParams) -> Result<LaneMap, ScenarioError> {
    let limit = params.speed_limit;
    let straight = vec![Point::new(0.0, 0.0), Point::new(STRAIGHT_LENGTH, 0.0)];

    let r = params.turn_radius;
    let mut turn = vec![TURN_ORIGIN, TURN_ORIGIN + Point::new(TURN_ENTRY, 0.0)];
    let centre = TURN_ORIGIN + Point::new(TURN_ENTRY, r);
    push_arc(&mut turn, centre, r, -FRAC_PI_2, FRAC_PI_2);
    let end = *turn.last().expect("non-empty");
    turn.push(end + Point::new(0.0, EXIT_LENGTH));

    let angle = params.fork_angle_deg.to_radians();
    let fork = |side: f64| {
        let mut pts = vec![FORK_ORIGIN, FORK_ORIGIN + Point::new(FORK_ENTRY, 0.0)];
        let centre = FORK_ORIGIN + Point::new(FORK_ENTRY, side * FORK_BLEND_RADIUS);
        push_arc(&mut pts, centre, FORK_BLEND_RADIUS, -side * FRAC_PI_2, side * angle);
        let end = *pts.last().expect("non-empty");
        pts.push(end + Point::from_heading(side * angle) * EXIT_LENGTH);
        pts
    };

    Ok(LaneMap::new(vec![
        Lane::new(FORK_LEFT_LANE, fork(1.0), limit)?,
        Lane::new(FORK_RIGHT_LANE, fork(-1.0), limit)?,
        Lane::new(STRAIGHT_LANE, straight, limit)?,
        Lane::new(TURN_LANE, turn, limit)?,
    ])?)
}

/// Appends points of a circular arc around `centre`, starting at polar angle
/// `start` and sweeping `sweep` radians (negative sweeps clockwise).
fn push_arc(pts: &mut Vec<Point>, centre: Point, radius: f64, start: f64, sweep: f64) {
    let steps = (sweep.abs() / ARC_STEP).ceil().max(1.0) as usize;
    for k in 1..=steps {
        let phi = start + sweep * k as f64 / steps as f64;
        pts.push(centre + Point::from_heading(phi) * radius);
    }
}

/// Lane-frame state of a simulated vehicle.
struct FrenetCar<'a> {
    lane: &'a Lane,
    s: f64,
    d: f64,
    psi: f64,
    v: f64,
    cruise: f64,
}

const SPEED_GAIN: f64 = 0.5;
const OFFSET_GAIN: f64 = 0.1;
const HEADING_GAIN: f64 = 0.8;

impl FrenetCar<'_> {
    fn state(&self, t: u32) -> AgentState {
        let (centre, tangent) = self.lane.point_at(self.s);
        let p = centre + Point::from_heading(tangent).perp() * self.d;
        AgentState::new(p.x, p.y, wrap_angle(tangent + self.psi), self.v, t)
    }

    fn step(&mut self, dt: f64, accel_noise: f64, yaw_noise: f64) {
        let accel = SPEED_GAIN * (self.cruise - self.v) + accel_noise;
        let yaw_rate = -(OFFSET_GAIN * self.d + HEADING_GAIN * self.psi) + yaw_noise;
        self.v = (self.v + accel * dt).max(0.0);
        self.psi += yaw_rate * dt;
        self.s += self.v * self.psi.cos() * dt;
        self.d += self.v * self.psi.sin() * dt;
    }
}

fn drive(mut car: FrenetCar<'_>, params: &ScenarioParams, rng: &mut ChaCha8Rng) -> Result<Trajectory, ScenarioError> {
    let accel = Normal::new(0.0, params.accel_noise_std).expect("validated std");
    let yaw = Normal::new(0.0, params.yawrate_noise_std).expect("validated std");
    let mut states = Vec::with_capacity(params.episode_length as usize);
    for t in 0..params.episode_length {
        if t > 0 {
            car.step(params.dt, accel.sample(rng), yaw.sample(rng));
        }
        states.push(car.state(t));
    }
    Ok(Trajectory::new(states, params.dt)?)
}

fn episode(kind: ScenarioKind, index: usize, map: &LaneMap, spec: &ScenarioSpec) -> Result<Episode, ScenarioError> {
    let p = &spec.params;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((kind as u64) << 32) | index as u64);

    let (lane_id, start, cruise) = match kind {
        ScenarioKind::Straight => (STRAIGHT_LANE, rng.random_range(20.0..40.0), rng.random_range(0.8..1.0) * p.speed_limit),
        ScenarioKind::Turn => (TURN_LANE, rng.random_range(20.0..40.0), rng.random_range(0.8..1.0) * p.speed_limit),
        ScenarioKind::Fork => {
            let lane = if rng.random_bool(0.5) { FORK_LEFT_LANE } else { FORK_RIGHT_LANE };
            (lane, rng.random_range(20.0..50.0), rng.random_range(0.8..1.0) * p.speed_limit)
        }
        ScenarioKind::Violator => (STRAIGHT_LANE, rng.random_range(20.0..40.0), p.violator_speed_factor * p.speed_limit),
    };
    let lane = map.lane(lane_id).expect("scenario lanes exist");

    let mut agents = BTreeMap::new();
    let target = FrenetCar { lane, s: start, d: 0.0, psi: 0.0, v: cruise, cruise };
    agents.insert("target".to_string(), drive(target, p, &mut rng)?);
    let mut gap = start;
    for i in 0..p.background_agents {
        gap -= rng.random_range(8.0..11.0);
        let cruise = cruise.min(0.95 * p.speed_limit);
        let car = FrenetCar { lane, s: gap.max(0.0), d: 0.0, psi: 0.0, v: cruise, cruise };
        agents.insert(format!("bg{i}"), drive(car, p, &mut rng)?);
    }
    Ok(Episode::new(format!("{kind}-{index:04}"), p.dt, agents, "target")?)
}

/// The shared map plus `spec.episodes` episodes of `spec.kind`, ids `<kind>-<index>`.
pub fn generate(spec: &ScenarioSpec) -> Result<(LaneMap, Vec<Episode>), ScenarioError> {
    spec.params.validate()?;
    let map = build_map(&spec.params)?;
    let episodes = (0..spec.episodes)
        .into_par_iter()
        .map(|i| episode(spec.kind, i, &map, spec))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((map, episodes))
}

/// Episode counts of a suite, per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KindCounts {
    pub straight: usize,
    pub turn: usize,
    pub fork: usize,
    pub violator: usize,
}

impl Default for KindCounts {
    fn default() -> Self {
        Self { straight: 50, turn: 50, fork: 50, violator: 50 }
    }
}

impl KindCounts {
    pub fn get(&self, kind: ScenarioKind) -> usize {
        match kind {
            ScenarioKind::Straight => self.straight,
            ScenarioKind::Turn => self.turn,
            ScenarioKind::Fork => self.fork,
            ScenarioKind::Violator => self.violator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub counts: KindCounts,
    pub params: ScenarioParams,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, counts: KindCounts::default(), params: ScenarioParams::default() }
    }
}

/// All kinds of the suite in one dataset, ordered straight, turn, fork, violator.
pub fn generate_suite(config: &SuiteConfig) -> Result<Dataset, ScenarioError> {
    config.params.validate()?;
    let map = build_map(&config.params)?;
    let mut episodes = Vec::new();
    for kind in ScenarioKind::ALL {
        let spec = ScenarioSpec { kind, seed: config.seed, episodes: config.counts.get(kind), params: config.params.clone() };
        episodes.extend(generate(&spec)?.1);
    }
    Dataset::new(map, episodes, config.params.dt).map_err(|e| ScenarioError::Spec(e.to_string()))
}
