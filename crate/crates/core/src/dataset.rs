//! JSON dataset format, scene extraction and the scene wire format.
//!
//! A dataset file holds one shared map and any number of episodes:
//!
//! ```json
//! { "dt": 0.5,
//!   "map": { "lanes": [ { "id": "a", "speed_limit": 10.0, "polyline": [[0,0],[100,0]] } ] },
//!   "episodes": [ { "id": "e0", "target_agent_id": "ego",
//!                   "agents": { "ego": [ { "t": 0, "x": 0, "y": 0, "heading": 0, "v": 10 } ] } } ] }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::types::{AgentState, Episode, Lane, LaneMap, PredictionScene, Trajectory, ValidationError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed dataset: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid dataset ({context}): {source}")]
    Invalid { context: String, source: ValidationError },
}

/// Serialized agent state; `v` is the speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub t: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
}

impl From<&AgentState> for StateRecord {
    fn from(s: &AgentState) -> Self {
        Self { t: s.t, x: s.x, y: s.y, heading: s.heading, v: s.speed }
    }
}

impl StateRecord {
    pub fn to_state(self) -> Result<AgentState, ValidationError> {
        AgentState::checked(self.x, self.y, self.heading, self.v, self.t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneRecord {
    pub id: String,
    pub speed_limit: f64,
    pub polyline: Vec<Point>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRecord {
    pub lanes: Vec<LaneRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeRecord {
    id: String,
    target_agent_id: String,
    agents: BTreeMap<String, Vec<StateRecord>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    dt: f64,
    map: MapRecord,
    episodes: Vec<EpisodeRecord>,
}

/// Scene payload sent to external predictors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub t: u32,
    pub dt: f64,
    pub target_agent_id: String,
    pub map: MapRecord,
    pub histories: BTreeMap<String, Vec<StateRecord>>,
}

/// A loaded dataset: one map shared by all episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dt: f64,
    pub map: LaneMap,
    pub episodes: Vec<Episode>,
}

impl MapRecord {
    pub fn from_map(map: &LaneMap) -> Self {
        Self {
            lanes: map
                .lanes()
                .iter()
                .map(|l| LaneRecord {
                    id: l.id().to_owned(),
                    speed_limit: l.speed_limit(),
                    polyline: l.polyline().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_map(&self) -> Result<LaneMap, ValidationError> {
        let lanes = self
            .lanes
            .iter()
            .map(|l| Lane::new(l.id.clone(), l.polyline.clone(), l.speed_limit))
            .collect::<Result<Vec<_>, _>>()?;
        LaneMap::new(lanes)
    }
}

fn states_to_records(tr: &Trajectory) -> Vec<StateRecord> {
    tr.states().iter().map(StateRecord::from).collect()
}

fn records_to_trajectory(records: &[StateRecord], dt: f64, context: &str) -> Result<Trajectory, ValidationError> {
    let states = records.iter().map(|r| r.to_state()).collect::<Result<Vec<_>, _>>()?;
    Trajectory::with_context(states, dt, context)
}

impl Dataset {
    pub fn new(map: LaneMap, episodes: Vec<Episode>, dt: f64) -> Result<Self, DatasetError> {
        if let Some(ep) = episodes.iter().find(|e| e.dt() != dt) {
            return Err(DatasetError::Invalid {
                context: format!("episode `{}`", ep.id()),
                source: ValidationError::BadDt { context: "episode dt differs from dataset dt".into(), dt: ep.dt() },
            });
        }
        Ok(Self { dt, map, episodes })
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let file: DatasetFile = serde_json::from_str(text)?;
        let invalid = |context: String| move |source| DatasetError::Invalid { context, source };
        if !(file.dt.is_finite() && file.dt > 0.0) {
            return Err(DatasetError::Invalid {
                context: "dataset".into(),
                source: ValidationError::BadDt { context: "dataset".into(), dt: file.dt },
            });
        }
        let map = file.map.to_map().map_err(invalid("map".into()))?;
        let mut episodes = Vec::with_capacity(file.episodes.len());
        for ep in &file.episodes {
            let mut agents = BTreeMap::new();
            for (agent, records) in &ep.agents {
                let context = format!("episode `{}`, agent `{agent}`", ep.id);
                let tr = records_to_trajectory(records, file.dt, &context).map_err(invalid(context.clone()))?;
                agents.insert(agent.clone(), tr);
            }
            let episode = Episode::new(ep.id.clone(), file.dt, agents, ep.target_agent_id.clone())
                .map_err(invalid(format!("episode `{}`", ep.id)))?;
            episodes.push(episode);
        }
        Ok(Self { dt: file.dt, map, episodes })
    }

    pub fn to_json(&self) -> String {
        let file = DatasetFile {
            dt: self.dt,
            map: MapRecord::from_map(&self.map),
            episodes: self
                .episodes
                .iter()
                .map(|e| EpisodeRecord {
                    id: e.id().to_owned(),
                    target_agent_id: e.target_agent_id().to_owned(),
                    agents: e.agents().iter().map(|(k, tr)| (k.clone(), states_to_records(tr))).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("dataset serialization cannot fail")
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_owned(), source })?;
    Dataset::from_json(&text)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    fs::write(path, dataset.to_json()).map_err(|source| DatasetError::Io { path: path.to_owned(), source })
}

/// Cuts an episode into prediction scenes.
///
/// A scene exists at every step `t` where the target has `history + 1` states
/// ending at `t` and `horizon` recorded future states. Other agents contribute
/// their states inside `[t - history, t]` if they are present at `t`.
pub fn extract_scenes(episode: &Episode, map: &Arc<LaneMap>, history: u32, horizon: u32) -> Vec<PredictionScene> {
    assert!(horizon >= 1, "horizon must be at least one step");
    let target = episode.target();
    let first = target.first_step() + history;
    let Some(last) = target.last_step().checked_sub(horizon) else {
        return Vec::new();
    };
    (first..=last)
        .map(|t| {
            let histories: BTreeMap<_, _> = episode
                .agents()
                .iter()
                .filter(|(_, tr)| tr.at(t).is_some())
                .filter_map(|(id, tr)| tr.window(t.saturating_sub(history), t).map(|w| (id.clone(), w)))
                .collect();
            debug_assert_eq!(histories[episode.target_agent_id()].len() as u32, history + 1);
            PredictionScene {
                t,
                dt: episode.dt(),
                target_agent_id: episode.target_agent_id().to_owned(),
                histories,
                map: Arc::clone(map),
            }
        })
        .collect()
}

impl SceneRecord {
    pub fn from_scene(scene: &PredictionScene) -> Self {
        Self {
            t: scene.t,
            dt: scene.dt,
            target_agent_id: scene.target_agent_id.clone(),
            map: MapRecord::from_map(&scene.map),
            histories: scene.histories.iter().map(|(k, tr)| (k.clone(), states_to_records(tr))).collect(),
        }
    }

    pub fn to_scene(&self) -> Result<PredictionScene, ValidationError> {
        let histories = self
            .histories
            .iter()
            .map(|(k, v)| records_to_trajectory(v, self.dt, k).map(|tr| (k.clone(), tr)))
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        if !histories.contains_key(&self.target_agent_id) {
            return Err(ValidationError::BadEpisode {
                episode: format!("scene t={}", self.t),
                reason: format!("target `{}` has no history", self.target_agent_id),
            });
        }
        Ok(PredictionScene {
            t: self.t,
            dt: self.dt,
            target_agent_id: self.target_agent_id.clone(),
            histories,
            map: Arc::new(self.map.to_map()?),
        })
    }
}
