//! Displacement metrics, tail risk and the mean difference from best.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Trajectory, TrajectorySamples};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no values to summarize")]
    Empty,
    #[error("tail level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("metric column {column} has non-positive best value {value}")]
    NonPositiveBest { column: usize, value: f64 },
    #[error("rows have different lengths")]
    Ragged,
}

/// Per-sample mean displacement over the horizon, paired with its final error.
fn per_sample(samples: &TrajectorySamples, truth: &Trajectory) -> Vec<(f64, f64)> {
    samples
        .samples()
        .iter()
        .map(|s| {
            let d: Vec<f64> = s.positions().zip(truth.positions()).map(|(p, q)| p.distance(q)).collect();
            let n = d.len().max(1) as f64;
            (d.iter().sum::<f64>() / n, d.last().copied().unwrap_or(0.0))
        })
        .collect()
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

pub fn ade(samples: &TrajectorySamples, truth: &Trajectory) -> f64 {
    mean(per_sample(samples, truth).into_iter().map(|(a, _)| a))
}

pub fn fde(samples: &TrajectorySamples, truth: &Trajectory) -> f64 {
    mean(per_sample(samples, truth).into_iter().map(|(_, f)| f))
}

pub fn min_ade(samples: &TrajectorySamples, truth: &Trajectory) -> f64 {
    per_sample(samples, truth).into_iter().map(|(a, _)| a).fold(f64::INFINITY, f64::min)
}

pub fn min_fde(samples: &TrajectorySamples, truth: &Trajectory) -> f64 {
    per_sample(samples, truth).into_iter().map(|(_, f)| f).fold(f64::INFINITY, f64::min)
}

/// Mean of the `ceil(level * M)` largest values.
pub fn cvar(values: &[f64], level: f64) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::BadLevel(level));
    }
    // The epsilon keeps 0.1 * 10 from rounding up to 2.
    let k = ((level * values.len() as f64 - 1e-9).ceil() as usize).clamp(1, values.len());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

/// Mean percentage gap of each row from the column-wise best (smallest) value.
pub fn mdb(rows: &[Vec<f64>]) -> Result<Vec<f64>, MetricsError> {
    let width = rows.first().ok_or(MetricsError::Empty)?.len();
    if width == 0 {
        return Err(MetricsError::Empty);
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(MetricsError::Ragged);
    }
    let best: Vec<f64> = (0..width).map(|j| rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).collect();
    if let Some((column, &value)) = best.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(MetricsError::NonPositiveBest { column, value });
    }
    Ok(rows
        .iter()
        .map(|r| r.iter().zip(&best).map(|(m, b)| (m - b) / b * 100.0).sum::<f64>() / width as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene_id: String,
    pub predictor: String,
    pub ade: f64,
    pub fde: f64,
    pub min_ade: f64,
    pub min_fde: f64,
}

impl SceneMetrics {
    pub fn compute(scene_id: impl Into<String>, samples: &TrajectorySamples, truth: &Trajectory) -> Self {
        let per = per_sample(samples, truth);
        let n = per.len() as f64;
        Self {
            scene_id: scene_id.into(),
            predictor: samples.label().to_owned(),
            ade: per.iter().map(|p| p.0).sum::<f64>() / n,
            fde: per.iter().map(|p| p.1).sum::<f64>() / n,
            min_ade: per.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            min_fde: per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.ade, self.fde, self.min_ade, self.min_fde]
    }
}

pub const METRIC_NAMES: [&str; 4] = ["ade", "fde", "min_ade", "min_fde"];
pub const CVAR_LEVEL: f64 = 0.1;

/// Summary of one predictor: mean and CVaR of each metric, in [`METRIC_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub predictor: String,
    pub scenes: usize,
    pub mean: [f64; 4],
    pub cvar: [f64; 4],
    /// Half-width of the normal 95% interval of each mean.
    pub ci95: [f64; 4],
    pub mdb: f64,
}

impl MetricRow {
    /// The eight summary values MDB compares: the means, then the CVaRs.
    pub fn summary(&self) -> Vec<f64> {
        self.mean.iter().chain(&self.cvar).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    /// Summarizes per-scene records, one row per predictor in `order`.
    pub fn from_records(records: &[SceneMetrics], order: &[&str]) -> Result<Self, MetricsError> {
        let mut rows: Vec<MetricRow> = order
            .par_iter()
            .map(|&label| {
                let mine: Vec<&SceneMetrics> = records.iter().filter(|r| r.predictor == label).collect();
                if mine.is_empty() {
                    return Err(MetricsError::Empty);
                }
                let mut row =
                    MetricRow { predictor: label.to_owned(), scenes: mine.len(), mean: [0.0; 4], cvar: [0.0; 4], ci95: [0.0; 4], mdb: 0.0 };
                for j in 0..4 {
                    let col: Vec<f64> = mine.iter().map(|r| r.values()[j]).collect();
                    let n = col.len() as f64;
                    let m = col.iter().sum::<f64>() / n;
                    let var = if col.len() > 1 { col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
                    row.mean[j] = m;
                    row.cvar[j] = cvar(&col, CVAR_LEVEL)?;
                    row.ci95[j] = 1.96 * (var / n).sqrt();
                }
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        let gaps = mdb(&rows.iter().map(MetricRow::summary).collect::<Vec<_>>())?;
        for (row, g) in rows.iter_mut().zip(gaps) {
            row.mdb = g;
        }
        Ok(Self { rows })
    }

    pub fn row(&self, predictor: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.predictor == predictor)
    }
}

/// Per-scene records as CSV: `scene_id,predictor,ade,fde,min_ade,min_fde`.
pub fn records_csv(records: &[SceneMetrics]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("writing to memory cannot fail");
    }
    if records.is_empty() {
        w.write_record(["scene_id", "predictor", "ade", "fde", "min_ade", "min_fde"]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

/// Parses the output of [`records_csv`].
pub fn parse_records_csv(text: &str) -> Result<Vec<SceneMetrics>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

/// Equal-width bin counts over `[min, max]` of `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0; bins.max(1)];
    if values.is_empty() {
        return Histogram { lo: 0.0, width: 0.0, counts };
    }
    let width = if hi > lo { (hi - lo) / counts.len() as f64 } else { 1.0 };
    for v in values {
        let k = (((v - lo) / width) as usize).min(counts.len() - 1);
        counts[k] += 1;
    }
    Histogram { lo, width, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::AgentState;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        let states = points.iter().enumerate().map(|(i, &(x, y))| AgentState::new(x, y, 0.0, 0.0, 1 + i as u32)).collect();
        Trajectory::new(states, 0.5).unwrap()
    }

    fn example() -> (TrajectorySamples, Trajectory) {
        let s = TrajectorySamples::new(vec![traj(&[(1.0, 0.0), (2.0, 0.0)]), traj(&[(0.0, 0.5), (0.0, 1.0)])], "p").unwrap();
        (s, traj(&[(0.0, 0.0), (0.0, 0.0)]))
    }

    #[test]
    fn hand_examples() {
        let (s, t) = example();
        assert!((ade(&s, &t) - 1.125).abs() < 1e-12);
        assert!((fde(&s, &t) - 1.5).abs() < 1e-12);
        assert!((min_ade(&s, &t) - 0.75).abs() < 1e-12);
        assert!((min_fde(&s, &t) - 1.0).abs() < 1e-12);
        assert_eq!(ade(&TrajectorySamples::new(vec![t.clone()], "p").unwrap(), &t), 0.0);
        let m = SceneMetrics::compute("s", &s, &t);
        assert_eq!(m.values(), [ade(&s, &t), fde(&s, &t), min_ade(&s, &t), min_fde(&s, &t)]);
    }

    #[test]
    fn cvar_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(cvar(&v, 0.1).unwrap(), 10.0);
        assert_eq!(cvar(&v, 0.2).unwrap(), 9.5);
        assert_eq!(cvar(&[3.5; 7], 0.1).unwrap(), 3.5);
        assert_eq!(cvar(&[], 0.1), Err(MetricsError::Empty));
        assert!(cvar(&v, 1.0).is_err());
    }

    #[test]
    fn mdb_examples() {
        let gaps = mdb(&[vec![2.0, 3.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(gaps, vec![50.0, 0.0]);
        assert_eq!(mdb(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(mdb(&[vec![0.0, 1.0], vec![1.0, 1.0]]), Err(MetricsError::NonPositiveBest { column: 0, .. })));
        assert_eq!(mdb(&[vec![1.0], vec![1.0, 2.0]]), Err(MetricsError::Ragged));
    }

    fn rec(scene: &str, p: &str, v: f64) -> SceneMetrics {
        SceneMetrics { scene_id: scene.into(), predictor: p.into(), ade: v, fde: 2.0 * v, min_ade: v / 2.0, min_fde: v }
    }

    #[test]
    fn table_and_csv() {
        let records: Vec<_> = (0..20).flat_map(|i| [rec(&format!("s{i}"), "a", 1.0 + i as f64), rec(&format!("s{i}"), "b", 2.0 + i as f64)]).collect();
        let table = MetricTable::from_records(&records, &["a", "b"]).unwrap();
        let a = table.row("a").unwrap();
        assert_eq!(a.mdb, 0.0);
        assert!(table.row("b").unwrap().mdb > 0.0);
        assert_eq!(a.scenes, 20);
        assert!((a.mean[0] - 10.5).abs() < 1e-12);
        assert!((a.cvar[0] - 19.5).abs() < 1e-12);
        for j in 0..4 {
            assert!(a.cvar[j] >= a.mean[j]);
        }
        assert_eq!(parse_records_csv(&records_csv(&records)).unwrap(), records);
        assert!(MetricTable::from_records(&records, &["a", "zzz"]).is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0, 2.0], 4);
        assert_eq!(h.counts, vec![1, 1, 2, 1]);
        assert_eq!(histogram(&[3.0, 3.0], 5).counts.iter().sum::<usize>(), 2);
    }

    /// Independent nested-loop evaluation of the four metrics.
    fn reference(preds: &[Vec<(f64, f64)>], truth: &[(f64, f64)]) -> [f64; 4] {
        let (n, t) = (preds.len(), truth.len());
        let mut total = 0.0;
        let mut final_total = 0.0;
        let mut best_avg = f64::MAX;
        let mut best_final = f64::MAX;
        for i in 0..n {
            let mut row = 0.0;
            for k in 0..t {
                let dx = preds[i][k].0 - truth[k].0;
                let dy = preds[i][k].1 - truth[k].1;
                let d = (dx * dx + dy * dy).sqrt();
                total += d;
                row += d;
                if k == t - 1 {
                    final_total += d;
                    if d < best_final {
                        best_final = d;
                    }
                }
            }
            if row / t as f64 <= best_avg {
                best_avg = row / t as f64;
            }
        }
        [total / (n * t) as f64, final_total / n as f64, best_avg, best_final]
    }

    #[test]
    fn agrees_with_nested_loop_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let n = rng.random_range(1..30);
            let t = rng.random_range(1..15);
            let mut pt = || (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
            let preds: Vec<Vec<(f64, f64)>> = (0..n).map(|_| (0..t).map(|_| pt()).collect()).collect();
            let truth: Vec<(f64, f64)> = (0..t).map(|_| pt()).collect();
            let s = TrajectorySamples::new(preds.iter().map(|p| traj(p)).collect(), "p").unwrap();
            let got = SceneMetrics::compute("x", &s, &traj(&truth)).values();
            for (g, r) in got.iter().zip(reference(&preds, &truth)) {
                assert!((g - r).abs() < 1e-9, "{g} vs {r}");
            }
        }
    }

    fn random_case() -> impl Strategy<Value = (Vec<Vec<(f64, f64)>>, Vec<(f64, f64)>)> {
        (1usize..8, 1usize..8).prop_flat_map(|(n, t)| {
            let p = (-30.0f64..30.0, -30.0f64..30.0);
            (prop::collection::vec(prop::collection::vec(p.clone(), t), n), prop::collection::vec(p, t))
        })
    }

    proptest! {
        #[test]
        fn min_never_exceeds_mean((preds, truth) in random_case()) {
            let s = TrajectorySamples::new(preds.iter().map(|p| traj(p)).collect(), "p").unwrap();
            let m = SceneMetrics::compute("x", &s, &traj(&truth));
            prop_assert!(m.min_ade <= m.ade + 1e-12 && m.min_fde <= m.fde + 1e-12);
        }

        #[test]
        fn rigid_motion_invariance((preds, truth) in random_case(), angle in -3.2f64..3.2, dx in -100.0f64..100.0, dy in -100.0f64..100.0) {
            let (c, s) = (angle.cos(), angle.sin());
            let move_pt = |&(x, y): &(f64, f64)| (c * x - s * y + dx, s * x + c * y + dy);
            let moved: Vec<Vec<_>> = preds.iter().map(|p| p.iter().map(move_pt).collect()).collect();
            let mt: Vec<_> = truth.iter().map(move_pt).collect();
            let a = SceneMetrics::compute("x", &TrajectorySamples::new(preds.iter().map(|p| traj(p)).collect(), "p").unwrap(), &traj(&truth));
            let b = SceneMetrics::compute("x", &TrajectorySamples::new(moved.iter().map(|p| traj(p)).collect(), "p").unwrap(), &traj(&mt));
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn cvar_dominates_mean(values in prop::collection::vec(0.0f64..100.0, 1..200), level in 0.01f64..0.99) {
            let c = cvar(&values, level).unwrap();
            let m = values.iter().sum::<f64>() / values.len() as f64;
            prop_assert!(c >= m - 1e-9);
            let all_equal = values.iter().all(|v| *v == values[0]);
            if !all_equal {
                let k = ((level * values.len() as f64 - 1e-9).ceil() as usize).clamp(1, values.len());
                if k < values.len() {
                    prop_assert!(c > m);
                }
            }
        }
    }
}
