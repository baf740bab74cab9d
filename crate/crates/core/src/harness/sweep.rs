use std::fmt::Write as _;

use serde::Serialize;

use super::run::{run_dataset, SampleDigest};
use super::{HarnessError, RunConfig};
use crate::dataset::{load_dataset, Dataset};
use crate::scenario::generate_suite;

/// MDB of every predictor at one learning rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    /// `(predictor, mdb)` in table order.
    pub mdb: Vec<(String, f64)>,
    pub scenes: usize,
    pub failed_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutput {
    /// Name of the dataset column in the table.
    pub dataset: String,
    pub rows: Vec<SweepRow>,
    /// Whether the standalone predictors drew identical samples at every η.
    pub standalone_samples_identical: bool,
    #[serde(skip)]
    pub digests: Vec<Vec<SampleDigest>>,
}

impl SweepOutput {
    /// Fused-predictor MDB per η, one row per dataset: `dataset,@eta=..,...`.
    pub fn table_csv(&self, fused_label: &str) -> String {
        let mut out = String::from("dataset");
        for r in &self.rows {
            let _ = write!(out, ",@eta={:?}", r.eta);
        }
        out.push('\n');
        out.push_str(&self.dataset);
        for r in &self.rows {
            let v = r.mdb.iter().find(|(p, _)| p == fused_label).map(|(_, v)| *v).unwrap_or(f64::NAN);
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
        out
    }
}

/// Reruns the configured experiment once per learning rate with shared seeds.
pub fn sweep_eta(cfg: &RunConfig, etas: &[f64]) -> Result<SweepOutput, HarnessError> {
    if etas.is_empty() {
        return Err(HarnessError::Config("eta list is empty".into()));
    }
    cfg.validate()?;
    let (dataset, name): (Dataset, String) = match &cfg.dataset {
        Some(path) => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into());
            (load_dataset(path)?, stem)
        }
        None => (generate_suite(&cfg.suite)?, "synthetic".into()),
    };
    let mut rows = Vec::with_capacity(etas.len());
    let mut digests = Vec::with_capacity(etas.len());
    let mut labels = None;
    for &eta in etas {
        let mut c = cfg.clone();
        c.fuser.eta = eta;
        let out = run_dataset(&c, &dataset)?;
        let report = out.report()?;
        rows.push(SweepRow {
            eta,
            mdb: report.table.rows.iter().map(|r| (r.predictor.clone(), r.mdb)).collect(),
            scenes: out.scenes(),
            failed_episodes: out.failures.len(),
        });
        labels.get_or_insert_with(|| out.labels.clone());
        digests.push(out.digests);
    }
    let [l, r, _] = labels.expect("at least one eta");
    let standalone = |d: &Vec<SampleDigest>| -> Vec<SampleDigest> {
        d.iter().filter(|x| x.predictor == l || x.predictor == r).cloned().collect()
    };
    let first = standalone(&digests[0]);
    let identical = digests.iter().all(|d| standalone(d) == first);
    Ok(SweepOutput { dataset: name, rows, standalone_samples_identical: identical, digests })
}
