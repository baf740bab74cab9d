use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, RunConfig};
use crate::dataset::{extract_scenes, load_dataset, Dataset};
use crate::fuser::{belief_sample_counts, belief_update_log, fuse, log_likelihood_ratio, log_perf_metric};
use crate::metrics::SceneMetrics;
use crate::predictors::Predictor;
use crate::scenario::generate_suite;
use crate::types::{AgentState, Episode, LaneMap, TrajectorySamples};

pub const FUSED_LABEL: &str = "mpf";

/// One line of the belief trace. `alpha` is absent when no update happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefStep {
    pub episode: String,
    pub t: u32,
    pub b_l: f64,
    pub b_r: f64,
    pub alpha: Option<f64>,
}

/// Fingerprint of the samples one predictor produced for one scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDigest {
    pub scene_id: String,
    pub predictor: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub episode: String,
    pub t: u32,
    pub reason: String,
}

/// Accumulated wall-clock time, seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub learned_query_s: f64,
    pub rule_query_s: f64,
    pub fuser_s: f64,
    pub queries: usize,
    pub updates: usize,
}

impl Timing {
    fn add(&mut self, other: &Timing) {
        self.learned_query_s += other.learned_query_s;
        self.rule_query_s += other.rule_query_s;
        self.fuser_s += other.fuser_s;
        self.queries += other.queries;
        self.updates += other.updates;
    }
}

/// Everything a run produced, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Learned, rule-based and fused labels.
    pub labels: [String; 3],
    pub episodes: usize,
    pub records: Vec<SceneMetrics>,
    pub beliefs: Vec<BeliefStep>,
    pub digests: Vec<SampleDigest>,
    pub failures: Vec<EpisodeFailure>,
    pub timing: Timing,
}

impl RunOutput {
    pub fn scenes(&self) -> usize {
        self.records.len() / 3
    }
}

/// Seed for one predictor query, from the master seed, episode, step and label.
pub fn derive_seed(master: u64, episode: &str, t: u32, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((episode.len() as u64).to_le_bytes());
    h.update(episode.as_bytes());
    h.update(t.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

fn digest(samples: &TrajectorySamples) -> String {
    let mut h = Sha256::new();
    for tr in samples.samples() {
        for s in tr.states() {
            for v in [s.x, s.y, s.heading, s.speed] {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update(s.t.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Default)]
struct EpisodeOutput {
    records: Vec<SceneMetrics>,
    beliefs: Vec<BeliefStep>,
    digests: Vec<SampleDigest>,
    failure: Option<EpisodeFailure>,
    timing: Timing,
}

fn run_episode(
    episode: &Episode,
    map: &Arc<LaneMap>,
    cfg: &RunConfig,
    predictors: &[Box<dyn Predictor>; 2],
) -> EpisodeOutput {
    let [learned, rule] = predictors;
    let fcfg = &cfg.fuser;
    let mut out = EpisodeOutput::default();
    let mut belief = fcfg.b0;
    let mut histories: Option<(Vec<AgentState>, Vec<AgentState>)> = None;

    for scene in extract_scenes(episode, map, cfg.history, cfg.horizon) {
        let t = scene.t;
        let scene_id = format!("{}@{t}", episode.id());
        let fail = |reason: String| EpisodeFailure { episode: episode.id().to_owned(), t, reason };

        let mut alpha = None;
        if let Some((hist_l, hist_r)) = histories.take() {
            let start = Instant::now();
            let x_t = scene.target_state();
            let update = log_perf_metric(&hist_l, x_t, fcfg.lambda)
                .and_then(|gl| Ok((gl, log_perf_metric(&hist_r, x_t, fcfg.lambda)?)))
                .and_then(|(gl, gr)| {
                    let ln_alpha = log_likelihood_ratio(gl, gr, &belief);
                    Ok((ln_alpha, belief_update_log(ln_alpha, fcfg)?))
                });
            match update {
                Ok((ln_alpha, b)) => {
                    belief = b;
                    alpha = Some(ln_alpha.exp());
                }
                Err(e) => {
                    out.failure = Some(fail(format!("belief update: {e}")));
                    break;
                }
            }
            out.timing.fuser_s += start.elapsed().as_secs_f64();
            out.timing.updates += 1;
        }

        let query = |p: &Box<dyn Predictor>| {
            let start = Instant::now();
            let r = p.sample(&scene, cfg.n, cfg.horizon, derive_seed(cfg.seed, episode.id(), t, p.label()));
            (r, start.elapsed().as_secs_f64())
        };
        let (samples_l, samples_r) = match (query(learned), query(rule)) {
            ((Ok(l), dl), (Ok(r), dr)) => {
                out.timing.learned_query_s += dl;
                out.timing.rule_query_s += dr;
                out.timing.queries += 1;
                (l, r)
            }
            ((Err(e), _), _) | (_, (Err(e), _)) => {
                out.failure = Some(fail(e.to_string()));
                break;
            }
        };
        histories = Some((samples_l.one_step(), samples_r.one_step()));

        let start = Instant::now();
        let (n_l, n_r) = belief_sample_counts(&belief, cfg.n, derive_seed(cfg.seed, episode.id(), t, "belief"));
        let fused = match fuse(&samples_l, &samples_r, n_l, n_r, FUSED_LABEL) {
            Ok(f) => f,
            Err(e) => {
                out.failure = Some(fail(e.to_string()));
                break;
            }
        };
        out.timing.fuser_s += start.elapsed().as_secs_f64();

        out.beliefs.push(BeliefStep {
            episode: episode.id().to_owned(),
            t,
            b_l: belief.learned(),
            b_r: belief.rule(),
            alpha,
        });
        let truth = episode.target_future(t, cfg.horizon).expect("scenes are extracted with a full future");
        for s in [&samples_l, &samples_r, &fused] {
            out.records.push(SceneMetrics::compute(scene_id.clone(), s, &truth));
            out.digests.push(SampleDigest { scene_id: scene_id.clone(), predictor: s.label().to_owned(), sha256: digest(s) });
        }
    }
    if out.failure.is_some() {
        out.records.clear();
        out.digests.clear();
    }
    out
}

/// Runs both predictors and the fuser over every episode of `dataset`.
///
/// Episodes are spread over `cfg.workers` threads; the output does not depend
/// on the thread count.
pub fn run_dataset(cfg: &RunConfig, dataset: &Dataset) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let predictors = cfg.build_predictors();
    let map = Arc::new(dataset.map.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let per_episode: Vec<EpisodeOutput> =
        pool.install(|| dataset.episodes.par_iter().map(|e| run_episode(e, &map, cfg, &predictors)).collect());

    let [l, r] = cfg.labels();
    let mut out = RunOutput {
        labels: [l, r, FUSED_LABEL.to_owned()],
        episodes: dataset.episodes.len(),
        records: Vec::new(),
        beliefs: Vec::new(),
        digests: Vec::new(),
        failures: Vec::new(),
        timing: Timing::default(),
    };
    for ep in per_episode {
        out.records.extend(ep.records);
        out.beliefs.extend(ep.beliefs);
        out.digests.extend(ep.digests);
        out.failures.extend(ep.failure);
        out.timing.add(&ep.timing);
    }
    Ok(out)
}

/// Loads the configured dataset, or generates the synthetic suite, and runs it.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let dataset = match &cfg.dataset {
        Some(path) => load_dataset(path)?,
        None => generate_suite(&cfg.suite)?,
    };
    run_dataset(cfg, &dataset)
}
