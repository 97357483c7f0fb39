//! Offline training of the detector and forecast models used by the
//! streaming curator.

use std::fs;
use std::path::Path;

use dqcurate_core::anomaly::{iforest_train, lof_train, time_series_features, FeatureRow, IForestParams, LofParams};
use dqcurate_core::forecast::{sarima_fit, SarimaSpec};
use dqcurate_core::imputation::interpolate_poly;
use dqcurate_core::pipeline::io::read_observations_csv;
use dqcurate_core::pipeline::{DetectorKind, PipelineConfig};
use dqcurate_core::preprocess::{aggregate_hourly, filter_nonsense};
use dqcurate_core::time::MILLIS_PER_HOUR;
use dqcurate_core::{SeriesPoint, Timestamp};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};
use crate::static_eval::resolve_dataset;

pub const SARIMA_FILE: &str = "sarima.json";
pub const IFOREST_FILE: &str = "iforest.json";
pub const LOF_FILE: &str = "lof.json";
pub const CONFIG_FILE: &str = "pipeline.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub hourly_points: usize,
    pub outliers_removed: usize,
    pub refilled_hours: usize,
    pub sarima: String,
    pub iforest: String,
    pub lof: String,
    pub css: f64,
}

/// Fills missing whole hours between the first and last point by
/// polynomial interpolation; returns the grid and the number filled.
pub fn regularize_hourly(points: &[SeriesPoint]) -> Result<(Vec<SeriesPoint>, usize)> {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Err(EvalError::invalid("empty hourly series"));
    };
    let hours = (last.t.millis() - first.t.millis()) / MILLIS_PER_HOUR + 1;
    let grid: Vec<Timestamp> = (0..hours).map(|h| first.t.plus_millis(h * MILLIS_PER_HOUR)).collect();
    let missing: Vec<Timestamp> = grid
        .iter()
        .copied()
        .filter(|t| points.binary_search_by_key(t, |p| p.t).is_err())
        .collect();
    let filled = interpolate_poly(points, &missing, 2, 6).map_err(EvalError::invalid)?;
    let mut out = points.to_vec();
    out.extend(missing.iter().zip(filled).map(|(&t, v)| SeriesPoint::new(t, v)));
    out.sort_by_key(|p| p.t);
    Ok((out, missing.len()))
}

/// Hourly training series from a static dataset (`.json` or
/// `synthetic:<seed>`) or an observation CSV.
pub fn hourly_series(dataset: &str) -> Result<Vec<SeriesPoint>> {
    if dataset.starts_with("synthetic:") || dataset.ends_with(".json") {
        let ds = resolve_dataset(dataset)?;
        return Ok(ds.hourly.iter().map(|p| SeriesPoint::new(p.t, p.value)).collect());
    }
    let obs = read_observations_csv(fs::File::open(dataset)?, "Temperature")?;
    let (kept, _) = filter_nonsense(obs, -10.0, 45.0).map_err(EvalError::invalid)?;
    Ok(aggregate_hourly(&kept))
}

/// Trains the forest, the novelty LOF and the SARIMA model and writes them
/// with a ready-to-use pipeline configuration into `out_dir`.
pub fn train(dataset: &str, out_dir: &Path) -> Result<TrainSummary> {
    let raw = hourly_series(dataset)?;
    let (series, refilled) = regularize_hourly(&raw)?;
    let rows: Vec<FeatureRow<f64>> = series.iter().map(|p| time_series_features(p.v, p.t)).collect();
    let forest = iforest_train(&rows, IForestParams::default()).map_err(EvalError::invalid)?;
    let flags: Vec<bool> = rows
        .iter()
        .map(|r| forest.is_outlier(r))
        .collect::<std::result::Result<_, _>>()
        .map_err(EvalError::invalid)?;

    let clean_rows: Vec<FeatureRow<f64>> = rows.iter().zip(&flags).filter(|(_, &f)| !f).map(|(r, _)| r.clone()).collect();
    let lof = lof_train(&clean_rows, LofParams::novelty_mode()).map_err(EvalError::invalid)?;

    let clean: Vec<SeriesPoint> = series.iter().zip(&flags).filter(|(_, &f)| !f).map(|(p, _)| *p).collect();
    let (clean, _) = regularize_hourly(&clean)?;
    let sarima = sarima_fit(&clean, SarimaSpec::hourly_default()).map_err(EvalError::invalid)?;

    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(SARIMA_FILE), sarima.to_json().map_err(EvalError::invalid)?)?;
    fs::write(out_dir.join(IFOREST_FILE), forest.to_json().map_err(EvalError::invalid)?)?;
    fs::write(out_dir.join(LOF_FILE), lof.to_json().map_err(EvalError::invalid)?)?;
    let config = PipelineConfig {
        detector: DetectorKind::ForecastBand,
        forecast_model: Some(SARIMA_FILE.into()),
        iforest_model: Some(IFOREST_FILE.into()),
        lof_model: Some(LOF_FILE.into()),
        ..PipelineConfig::default()
    };
    fs::write(out_dir.join(CONFIG_FILE), toml::to_string(&config).map_err(EvalError::invalid)?)?;

    Ok(TrainSummary {
        hourly_points: series.len(),
        outliers_removed: flags.iter().filter(|&&f| f).count(),
        refilled_hours: refilled,
        sarima: sarima.methodology(),
        iforest: forest.methodology(),
        lof: lof.methodology(),
        css: sarima.log.final_css,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regularize_fills_missing_hours() {
        let h = |i: i64| Timestamp::from_millis(i * MILLIS_PER_HOUR);
        let pts: Vec<SeriesPoint> = [0, 1, 2, 4, 5, 6]
            .iter()
            .map(|&i| SeriesPoint::new(h(i), i as f64 * 2.0))
            .collect();
        let (grid, filled) = regularize_hourly(&pts).unwrap();
        assert_eq!(filled, 1);
        assert_eq!(grid.len(), 7);
        assert!((grid[3].v - 6.0).abs() < 1e-9);
    }
}
