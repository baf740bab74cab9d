//! Domain types shared by predictors, the fuser and the metrics.
//!
//! Everything here is immutable after construction; constructors enforce the
//! invariants so downstream code can rely on them without re-checking.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{self, wrap_angle, Point, Projection};

/// Invariant violation in a domain object.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("{context}: non-finite value in field `{field}`")]
    NonFinite { context: String, field: &'static str },
    #[error("{context}: negative speed {speed}")]
    NegativeSpeed { context: String, speed: f64 },
    #[error("{context}: time step must be positive, got {dt}")]
    BadDt { context: String, dt: f64 },
    #[error("{context}: trajectory is empty")]
    EmptyTrajectory { context: String },
    #[error("{context}: step indices must increase by 1 (found {prev} then {next})")]
    NonContiguousSteps { context: String, prev: u32, next: u32 },
    #[error("lane `{id}`: {reason}")]
    BadLane { id: String, reason: String },
    #[error("lane map: {0}")]
    BadMap(String),
    #[error("episode `{episode}`: {reason}")]
    BadEpisode { episode: String, reason: String },
    #[error("samples `{label}`: {reason}")]
    BadSamples { label: String, reason: String },
}

/// Planar state of one agent at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    /// Radians, normalized to `(-π, π]`.
    pub heading: f64,
    /// Meters per second, non-negative.
    pub speed: f64,
    pub t: u32,
}

impl AgentState {
    /// Builds a state, wrapping the heading. Panics in debug builds on negative speed;
    /// use [`AgentState::checked`] for untrusted input.
    pub fn new(x: f64, y: f64, heading: f64, speed: f64, t: u32) -> Self {
        debug_assert!(speed >= 0.0, "negative speed {speed}");
        Self { x, y, heading: wrap_angle(heading), speed, t }
    }

    pub fn checked(x: f64, y: f64, heading: f64, speed: f64, t: u32) -> Result<Self, ValidationError> {
        let context = format!("state t={t}");
        for (field, v) in [("x", x), ("y", y), ("heading", heading), ("v", speed)] {
            if !v.is_finite() {
                return Err(ValidationError::NonFinite { context, field });
            }
        }
        if speed < 0.0 {
            return Err(ValidationError::NegativeSpeed { context, speed });
        }
        Ok(Self::new(x, y, heading, speed, t))
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Ordered, contiguous sequence of states sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<AgentState>,
    dt: f64,
}

impl Trajectory {
    pub fn new(states: Vec<AgentState>, dt: f64) -> Result<Self, ValidationError> {
        Self::with_context(states, dt, "trajectory")
    }

    pub(crate) fn with_context(
        states: Vec<AgentState>,
        dt: f64,
        context: &str,
    ) -> Result<Self, ValidationError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ValidationError::BadDt { context: context.to_owned(), dt });
        }
        if states.is_empty() {
            return Err(ValidationError::EmptyTrajectory { context: context.to_owned() });
        }
        for w in states.windows(2) {
            if w[1].t != w[0].t + 1 {
                return Err(ValidationError::NonContiguousSteps {
                    context: context.to_owned(),
                    prev: w[0].t,
                    next: w[1].t,
                });
            }
        }
        Ok(Self { states, dt })
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// Always false; trajectories are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first_step(&self) -> u32 {
        self.states[0].t
    }

    pub fn last_step(&self) -> u32 {
        self.states[self.states.len() - 1].t
    }

    pub fn first(&self) -> &AgentState {
        &self.states[0]
    }

    pub fn last(&self) -> &AgentState {
        &self.states[self.states.len() - 1]
    }

    /// State at step `t`, if covered.
    pub fn at(&self, t: u32) -> Option<&AgentState> {
        t.checked_sub(self.first_step()).and_then(|i| self.states.get(i as usize))
    }

    /// Sub-trajectory covering steps `from..=to` intersected with this one.
    pub fn window(&self, from: u32, to: u32) -> Option<Trajectory> {
        let lo = from.max(self.first_step());
        let hi = to.min(self.last_step());
        if lo > hi {
            return None;
        }
        let a = (lo - self.first_step()) as usize;
        let b = (hi - self.first_step()) as usize;
        Some(Trajectory { states: self.states[a..=b].to_vec(), dt: self.dt })
    }

    pub fn positions(&self) -> impl Iterator<Item = Point> + '_ {
        self.states.iter().map(AgentState::position)
    }
}

/// A lane centerline with its speed limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    id: String,
    polyline: Vec<Point>,
    speed_limit: f64,
    length: f64,
}

impl Lane {
    pub fn new(id: impl Into<String>, polyline: Vec<Point>, speed_limit: f64) -> Result<Self, ValidationError> {
        let id = id.into();
        let bad = |reason: String| ValidationError::BadLane { id: id.clone(), reason };
        if polyline.len() < 2 {
            return Err(bad(format!("polyline needs at least 2 points, got {}", polyline.len())));
        }
        if let Some(p) = polyline.iter().find(|p| !p.is_finite()) {
            return Err(bad(format!("non-finite polyline point {p:?}")));
        }
        if let Some(i) = polyline.windows(2).position(|w| w[0] == w[1]) {
            return Err(bad(format!("zero-length segment at index {i}")));
        }
        if !(speed_limit.is_finite() && speed_limit > 0.0) {
            return Err(bad(format!("speed limit must be positive, got {speed_limit}")));
        }
        let length = geometry::polyline_length(&polyline);
        Ok(Self { id, polyline, speed_limit, length })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn polyline(&self) -> &[Point] {
        &self.polyline
    }

    pub fn speed_limit(&self) -> f64 {
        self.speed_limit
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn project(&self, point: Point) -> Projection {
        geometry::project_to_polyline(point, &self.polyline)
    }

    /// Centerline point and tangent heading at arc length `s` (clamped to the lane).
    pub fn point_at(&self, s: f64) -> (Point, f64) {
        geometry::point_at_arc_length(&self.polyline, s)
    }
}

/// The scene map: a non-empty set of uniquely named lanes.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneMap {
    lanes: Vec<Lane>,
}

impl LaneMap {
    pub fn new(lanes: Vec<Lane>) -> Result<Self, ValidationError> {
        if lanes.is_empty() {
            return Err(ValidationError::BadMap("map has no lanes".into()));
        }
        let mut ids: Vec<&str> = lanes.iter().map(Lane::id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ValidationError::BadMap(format!("duplicate lane id `{}`", w[0])));
        }
        Ok(Self { lanes })
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id() == id)
    }
}

/// One continuous recording: every agent's trajectory plus the agent to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    id: String,
    dt: f64,
    agents: BTreeMap<String, Trajectory>,
    target_agent_id: String,
}

impl Episode {
    pub fn new(
        id: impl Into<String>,
        dt: f64,
        agents: BTreeMap<String, Trajectory>,
        target_agent_id: impl Into<String>,
    ) -> Result<Self, ValidationError> {
        let id = id.into();
        let target_agent_id = target_agent_id.into();
        let bad = |reason: String| ValidationError::BadEpisode { episode: id.clone(), reason };
        if !agents.contains_key(&target_agent_id) {
            return Err(bad(format!("target agent `{target_agent_id}` not present")));
        }
        if let Some((agent, tr)) = agents.iter().find(|(_, tr)| tr.dt() != dt) {
            return Err(bad(format!("agent `{agent}` has dt {} but episode dt is {dt}", tr.dt())));
        }
        Ok(Self { id, dt, agents, target_agent_id })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn agents(&self) -> &BTreeMap<String, Trajectory> {
        &self.agents
    }

    pub fn target_agent_id(&self) -> &str {
        &self.target_agent_id
    }

    pub fn target(&self) -> &Trajectory {
        &self.agents[&self.target_agent_id]
    }

    /// Ground-truth target states for steps `t+1..=t+horizon`, if fully recorded.
    pub fn target_future(&self, t: u32, horizon: u32) -> Option<Trajectory> {
        let target = self.target();
        if t + horizon > target.last_step() || t + 1 < target.first_step() {
            return None;
        }
        target.window(t + 1, t + horizon)
    }

    /// Copy of this episode with every trajectory cut after step `last`.
    pub fn truncated(&self, last: u32) -> Option<Episode> {
        let agents: BTreeMap<_, _> = self
            .agents
            .iter()
            .filter_map(|(id, tr)| tr.window(0, last).map(|w| (id.clone(), w)))
            .collect();
        Episode::new(self.id.clone(), self.dt, agents, self.target_agent_id.clone()).ok()
    }
}

/// What a predictor may see at step `t`: recent history of every agent present at `t`, and the map.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionScene {
    pub t: u32,
    pub dt: f64,
    pub target_agent_id: String,
    pub histories: BTreeMap<String, Trajectory>,
    pub map: Arc<LaneMap>,
}

impl PredictionScene {
    pub fn target_history(&self) -> &Trajectory {
        &self.histories[&self.target_agent_id]
    }

    /// The target's state at step `t`.
    pub fn target_state(&self) -> &AgentState {
        self.target_history().last()
    }

    /// States at step `t` of every non-target agent.
    pub fn other_states(&self) -> impl Iterator<Item = (&str, &AgentState)> + '_ {
        self.histories
            .iter()
            .filter(|(id, _)| **id != self.target_agent_id)
            .filter_map(|(id, tr)| tr.at(self.t).map(|s| (id.as_str(), s)))
    }
}

/// `N` sampled futures of equal length from one predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySamples {
    samples: Vec<Trajectory>,
    label: String,
}

impl TrajectorySamples {
    pub fn new(samples: Vec<Trajectory>, label: impl Into<String>) -> Result<Self, ValidationError> {
        let label = label.into();
        let bad = |reason: String| ValidationError::BadSamples { label: label.clone(), reason };
        let Some(first) = samples.first() else {
            return Err(bad("no samples".into()));
        };
        let (len, dt, start) = (first.len(), first.dt(), first.first_step());
        for (i, s) in samples.iter().enumerate() {
            if s.len() != len {
                return Err(bad(format!("sample {i} has {} states, expected {len}", s.len())));
            }
            if s.dt() != dt {
                return Err(bad(format!("sample {i} has dt {}, expected {dt}", s.dt())));
            }
            if s.first_step() != start {
                return Err(bad(format!("sample {i} starts at step {}, expected {start}", s.first_step())));
            }
        }
        Ok(Self { samples, label })
    }

    pub fn samples(&self) -> &[Trajectory] {
        &self.samples
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of future states per sample.
    pub fn horizon(&self) -> usize {
        self.samples[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.samples[0].dt()
    }

    pub fn first_step(&self) -> u32 {
        self.samples[0].first_step()
    }

    /// The first predicted state of every sample.
    pub fn one_step(&self) -> Vec<AgentState> {
        self.samples.iter().map(|s| *s.first()).collect()
    }

    pub fn into_samples(self) -> Vec<Trajectory> {
        self.samples
    }
}
