//! Minimal external predictor: answers each request line with `N` copies of a
//! constant-velocity rollout of the target.
//!
//! Flags for exercising failure handling:
//! `--short` answers with one sample too few, `--die` exits on the first
//! request, `--hang` never answers.

use std::io::{self, BufRead, Write};

use anyhow::{bail, Context};
use serde_json::{json, Value};

fn rollout(request: &Value) -> anyhow::Result<(Vec<Value>, usize)> {
    let scene = &request["scene"];
    let n = request["N"].as_u64().context("missing N")? as usize;
    let horizon = request["T"].as_u64().context("missing T")? as usize;
    let dt = scene["dt"].as_f64().context("missing dt")?;
    let target = scene["target_agent_id"].as_str().context("missing target_agent_id")?;
    let last = scene["histories"][target].as_array().and_then(|h| h.last()).context("target has no history")?;
    let field = |k: &str| last[k].as_f64().with_context(|| format!("state lacks {k}"));
    let (x, y, heading, v) = (field("x")?, field("y")?, field("heading")?, field("v")?);
    let states = (1..=horizon)
        .map(|k| {
            let d = v * dt * k as f64;
            json!({ "x": x + d * heading.cos(), "y": y + d * heading.sin(), "heading": heading, "v": v })
        })
        .collect();
    Ok((states, n))
}

fn main() -> anyhow::Result<()> {
    let mode = std::env::args().nth(1).unwrap_or_default();
    if !matches!(mode.as_str(), "" | "--short" | "--die" | "--hang") {
        bail!("unknown flag {mode}");
    }
    let stdout = io::stdout();
    for line in io::stdin().lock().lines() {
        let line = line?;
        match mode.as_str() {
            "--die" => std::process::exit(3),
            "--hang" => loop {
                std::thread::park();
            },
            _ => {}
        }
        let request: Value = serde_json::from_str(&line).context("request is not JSON")?;
        let (states, mut n) = rollout(&request)?;
        if mode == "--short" {
            n = n.saturating_sub(1);
        }
        let samples: Vec<&Vec<Value>> = std::iter::repeat_n(&states, n).collect();
        let mut out = stdout.lock();
        writeln!(out, "{}", json!({ "samples": samples }))?;
        out.flush()?;
    }
    Ok(())
}
