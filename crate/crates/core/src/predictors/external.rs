//! Adapter for predictors living in a child process.
//!
//! The child reads one JSON request per line on stdin,
//! `{"scene": <scene>, "N": n, "T": horizon, "seed": seed}`, and answers with one
//! line `{"samples": [[{"x":..,"y":..,"heading":..,"v":..}, ...T], ...N]}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{PredictError, Predictor};
use crate::dataset::SceneRecord;
use crate::types::{AgentState, PredictionScene, Trajectory, TrajectorySamples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalConfig {
    /// Program and arguments.
    pub command: Vec<String>,
    pub timeout_secs: f64,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        Self { command: Vec::new(), timeout_secs: 5.0 }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    scene: &'a SceneRecord,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    horizon: u32,
    seed: u64,
}

#[derive(Deserialize)]
struct Response {
    samples: Vec<Vec<ResponseState>>,
}

#[derive(Deserialize)]
struct ResponseState {
    x: f64,
    y: f64,
    heading: f64,
    v: f64,
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for ChildIo {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Talks to a long-lived child process; calls are serialized on its pipes.
pub struct ExternalPredictor {
    label: String,
    config: ExternalConfig,
    child: Mutex<Option<ChildIo>>,
}

impl std::fmt::Debug for ExternalPredictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalPredictor").field("label", &self.label).field("config", &self.config).finish()
    }
}

impl ExternalPredictor {
    pub fn new(label: impl Into<String>, config: ExternalConfig) -> Self {
        Self { label: label.into(), config, child: Mutex::new(None) }
    }

    fn spawn(&self) -> Result<ChildIo, PredictError> {
        let io_err = |reason: String| PredictError::Io { reason, payload: String::new() };
        let (program, args) = self.config.command.split_first().ok_or_else(|| io_err("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| io_err(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ChildIo { child, stdin, lines })
    }

    fn exchange(&self, io: &mut ChildIo, request: &str) -> Result<String, PredictError> {
        writeln!(io.stdin, "{request}")
            .and_then(|_| io.stdin.flush())
            .map_err(|e| PredictError::Io { reason: format!("write failed: {e}"), payload: String::new() })?;
        match io.lines.recv_timeout(Duration::from_secs_f64(self.config.timeout_secs)) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(PredictError::Io { reason: format!("read failed: {e}"), payload: String::new() }),
            Err(RecvTimeoutError::Timeout) => {
                Err(PredictError::Timeout { seconds: self.config.timeout_secs, payload: String::new() })
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(PredictError::Io { reason: "child closed its output".into(), payload: String::new() })
            }
        }
    }

    fn parse(&self, scene: &PredictionScene, n: usize, horizon: u32, line: &str) -> Result<TrajectorySamples, PredictError> {
        let protocol = |reason: String| PredictError::Protocol { reason, payload: line.to_owned() };
        let response: Response = serde_json::from_str(line).map_err(|e| protocol(format!("malformed response: {e}")))?;
        if response.samples.len() != n {
            return Err(protocol(format!("expected {n} samples, got {}", response.samples.len())));
        }
        let mut samples = Vec::with_capacity(n);
        for (i, states) in response.samples.iter().enumerate() {
            if states.len() != horizon as usize {
                return Err(protocol(format!("sample {i} has {} states, expected {horizon}", states.len())));
            }
            let states = states
                .iter()
                .zip(scene.t + 1..)
                .map(|(s, t)| AgentState::checked(s.x, s.y, s.heading, s.v, t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| protocol(format!("sample {i}: {e}")))?;
            samples.push(Trajectory::new(states, scene.dt).map_err(|e| protocol(e.to_string()))?);
        }
        TrajectorySamples::new(samples, &self.label).map_err(|e| protocol(e.to_string()))
    }
}

impl Predictor for ExternalPredictor {
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
        let record = SceneRecord::from_scene(scene);
        let request = serde_json::to_string(&Request { scene: &record, n, horizon, seed })
            .expect("request serialization cannot fail");
        let mut guard = self.child.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let io = guard.as_mut().expect("child just spawned");
        let result = self.exchange(io, &request).and_then(|line| self.parse(scene, n, horizon, &line));
        if matches!(result, Err(PredictError::Io { .. } | PredictError::Timeout { .. })) {
            // The child is in an unknown state; start a fresh one next time.
            *guard = None;
        }
        result
    }
}
