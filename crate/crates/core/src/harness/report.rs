use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use super::run::RunOutput;
use super::HarnessError;
use crate::metrics::{histogram, parse_records_csv, records_csv, MetricTable, SceneMetrics, METRIC_NAMES};

pub const SUMMARY_BINS: usize = 20;

/// Rendered output files, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: MetricTable,
    pub files: BTreeMap<&'static str, String>,
}

fn labels_in_order(records: &[SceneMetrics]) -> Vec<&str> {
    let mut labels: Vec<&str> = Vec::new();
    for r in records {
        if !labels.contains(&r.predictor.as_str()) {
            labels.push(&r.predictor);
        }
    }
    labels
}

fn scatter_csv(records: &[SceneMetrics], a: &str, b: &str) -> String {
    let mut out = format!("scene_id,ade_{a},ade_{b}\n");
    let mut pending: BTreeMap<&str, f64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.predictor == a) {
        pending.insert(&r.scene_id, r.ade);
    }
    for r in records.iter().filter(|r| r.predictor == b) {
        if let Some(x) = pending.get(r.scene_id.as_str()) {
            let _ = writeln!(out, "{},{x},{}", r.scene_id, r.ade);
        }
    }
    out
}

fn histograms_csv(records: &[SceneMetrics], labels: &[&str]) -> String {
    let mut out = String::from("predictor,metric,bin,lo,hi,count\n");
    for label in labels {
        let mine: Vec<&SceneMetrics> = records.iter().filter(|r| r.predictor == *label).collect();
        for (j, name) in METRIC_NAMES.iter().enumerate() {
            let values: Vec<f64> = mine.iter().map(|r| r.values()[j]).collect();
            let h = histogram(&values, SUMMARY_BINS);
            for (k, count) in h.counts.iter().enumerate() {
                let lo = h.lo + h.width * k as f64;
                let _ = writeln!(out, "{label},{name},{k},{lo},{},{count}", lo + h.width);
            }
        }
    }
    out
}

/// Summary, scatter and histogram files from per-scene records alone.
///
/// Predictors appear in order of first occurrence; the scatter file pairs the
/// first two.
pub fn build_report(records: &[SceneMetrics]) -> Result<Report, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRun { episodes: 0, failed: 0 });
    }
    let labels = labels_in_order(records);
    let table = MetricTable::from_records(records, &labels)?;
    let scenes = records.iter().filter(|r| r.predictor == labels[0]).count();
    let mut files = BTreeMap::new();
    files.insert("metrics.csv", records_csv(records));
    let summary = json!({ "scenes": scenes, "metrics": METRIC_NAMES, "cvar_level": crate::metrics::CVAR_LEVEL, "table": table });
    files.insert("summary.json", serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n");
    if labels.len() >= 2 {
        files.insert("scatter.csv", scatter_csv(records, labels[0], labels[1]));
    }
    files.insert("histograms.csv", histograms_csv(records, &labels));
    Ok(Report { table, files })
}

impl RunOutput {
    /// Full report of a run: [`build_report`] plus belief traces, sample
    /// digests, failures and timing.
    pub fn report(&self) -> Result<Report, HarnessError> {
        if self.records.is_empty() {
            return Err(HarnessError::EmptyRun { episodes: self.episodes, failed: self.failures.len() });
        }
        let mut report = build_report(&self.records)?;
        let mut beliefs = String::new();
        for b in &self.beliefs {
            beliefs += &serde_json::to_string(b).expect("belief step serializes");
            beliefs.push('\n');
        }
        report.files.insert("beliefs.jsonl", beliefs);
        let mut digests = String::from("scene_id,predictor,sha256\n");
        for d in &self.digests {
            let _ = writeln!(digests, "{},{},{}", d.scene_id, d.predictor, d.sha256);
        }
        report.files.insert("samples.csv", digests);
        let run = json!({
            "episodes": self.episodes,
            "scenes": self.scenes(),
            "failed_episodes": self.failures.len(),
            "failures": self.failures,
        });
        report.files.insert("run.json", serde_json::to_string_pretty(&run).expect("run summary serializes") + "\n");
        let t = &self.timing;
        let per = |total: f64, count: usize| if count == 0 { 0.0 } else { 1e3 * total / count as f64 };
        let timing = json!({
            "learned_query_ms_per_scene": per(t.learned_query_s, t.queries),
            "rule_query_ms_per_scene": per(t.rule_query_s, t.queries),
            "fuser_ms_per_step": per(t.fuser_s, t.updates.max(t.queries)),
            "queries": t.queries,
            "updates": t.updates,
        });
        report.files.insert("timing.json", serde_json::to_string_pretty(&timing).expect("timing serializes") + "\n");
        Ok(report)
    }
}

pub fn write_report(report: &Report, dir: &Path) -> Result<(), HarnessError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, contents) in &report.files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
    }
    Ok(())
}

/// Rebuilds summary, scatter and histogram files from a run directory's `metrics.csv`.
pub fn report_dir(dir: &Path) -> Result<Report, HarnessError> {
    let path = dir.join("metrics.csv");
    let text = fs::read_to_string(&path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    let records = parse_records_csv(&text).map_err(|source| HarnessError::Records { path, source })?;
    let report = build_report(&records)?;
    write_report(&report, dir)?;
    Ok(report)
}
