//! Aggregated evaluation results and their on-disk form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::overhead::OverheadRow;
use crate::static_eval::AlgorithmMetrics;

/// Median timings of one item index across rounds, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub item_index: usize,
    pub requesting_s: f64,
    pub processing_s: f64,
    pub total_s: f64,
}

/// Shape statistics of a timing series over its stationary phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flatness {
    pub items: usize,
    pub mean_total_s: f64,
    pub sigma_total_s: f64,
    pub mean_requesting_s: f64,
    pub mean_processing_s: f64,
    /// Least-squares slope of total time against item index.
    pub slope_s_per_item: f64,
}

impl Flatness {
    pub fn cv(&self) -> f64 {
        self.sigma_total_s / self.mean_total_s
    }

    /// Drift across the phase relative to its mean.
    pub fn relative_drift(&self) -> f64 {
        (self.slope_s_per_item * self.items as f64).abs() / self.mean_total_s
    }

    pub fn is_flat(&self) -> bool {
        self.relative_drift() < 0.2 && self.cv() < 0.25
    }
}

/// Median of a sample; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-item medians across rounds. `rounds[r][i]` is (requesting, processing)
/// of item `i` in round `r`; every round must have the same length.
pub fn median_series(rounds: &[Vec<(f64, f64)>]) -> Vec<TimingRow> {
    let items = rounds.first().map_or(0, Vec::len);
    (0..items)
        .map(|i| {
            let req: Vec<f64> = rounds.iter().map(|r| r[i].0).collect();
            let proc: Vec<f64> = rounds.iter().map(|r| r[i].1).collect();
            let tot: Vec<f64> = rounds.iter().map(|r| r[i].0 + r[i].1).collect();
            TimingRow {
                item_index: i,
                requesting_s: median(&req),
                processing_s: median(&proc),
                total_s: median(&tot),
            }
        })
        .collect()
}

/// Flatness over the final half of the item indices.
pub fn stationary_flatness(rows: &[TimingRow]) -> Option<Flatness> {
    let phase = &rows[rows.len() / 2..];
    if phase.len() < 2 {
        return None;
    }
    let n = phase.len() as f64;
    let mean = |f: fn(&TimingRow) -> f64| phase.iter().map(f).sum::<f64>() / n;
    let mean_total = mean(|r| r.total_s);
    let mean_x = mean(|r| r.item_index as f64);
    let var = phase.iter().map(|r| (r.total_s - mean_total).powi(2)).sum::<f64>() / n;
    let sxy: f64 = phase
        .iter()
        .map(|r| (r.item_index as f64 - mean_x) * (r.total_s - mean_total))
        .sum();
    let sxx: f64 = phase.iter().map(|r| (r.item_index as f64 - mean_x).powi(2)).sum();
    Some(Flatness {
        items: phase.len(),
        mean_total_s: mean_total,
        sigma_total_s: var.sqrt(),
        mean_requesting_s: mean(|r| r.requesting_s),
        mean_processing_s: mean(|r| r.processing_s),
        slope_s_per_item: sxy / sxx,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunInfo {
    pub sensors: usize,
    pub per_sensor: usize,
    pub cadence_seconds: f64,
    pub rounds: usize,
    pub seed: u64,
}

/// Everything an evaluation run produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub run: RunInfo,
    /// Per-dimension median timing series, keyed by dimension name.
    pub timings: BTreeMap<String, Vec<TimingRow>>,
    /// Records returned by the completeness history query, per item index.
    pub records_fetched: Vec<usize>,
    pub overheads: Vec<OverheadRow>,
    pub metrics: Option<AlgorithmMetrics>,
}

/// The JSON part of a written report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub run: RunInfo,
    pub stationary: BTreeMap<String, Flatness>,
    /// First item index from which the completeness query returns its
    /// maximum record count.
    pub records_fetched_saturation: Option<usize>,
    pub records_fetched_max: usize,
    pub overheads: Vec<OverheadRow>,
    pub metrics: Option<AlgorithmMetrics>,
}

impl EvalReport {
    pub fn flatness(&self) -> BTreeMap<String, Flatness> {
        self.timings
            .iter()
            .filter_map(|(k, rows)| stationary_flatness(rows).map(|f| (k.clone(), f)))
            .collect()
    }

    /// Item index where the fetched-record count reaches its maximum and
    /// stays there.
    pub fn saturation_index(&self) -> Option<usize> {
        let max = *self.records_fetched.iter().max()?;
        let last_below = self.records_fetched.iter().rposition(|&n| n < max);
        Some(last_below.map_or(0, |i| i + 1))
    }

    pub fn summary(&self) -> Summary {
        Summary {
            run: self.run.clone(),
            stationary: self.flatness(),
            records_fetched_saturation: self.saturation_index(),
            records_fetched_max: self.records_fetched.iter().copied().max().unwrap_or(0),
            overheads: self.overheads.clone(),
            metrics: self.metrics.clone(),
        }
    }
}

pub const TIMING_DIMENSIONS: [&str; 4] = ["accuracy", "completeness", "timeliness", "precision"];

/// Writes `<dimension>.csv` for each of the four dimensions and
/// `summary.json` into `dir`.
pub fn report_write(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for dim in TIMING_DIMENSIONS {
        let mut w = csv::Writer::from_path(dir.join(format!("{dim}.csv")))?;
        w.write_record(["item_index", "requesting_s", "processing_s", "total_s"])?;
        for r in report.timings.get(dim).map(Vec::as_slice).unwrap_or_default() {
            w.write_record([
                r.item_index.to_string(),
                r.requesting_s.to_string(),
                r.processing_s.to_string(),
                r.total_s.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let json = serde_json::to_string_pretty(&report.summary())?;
    fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
