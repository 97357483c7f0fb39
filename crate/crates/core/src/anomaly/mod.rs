//! Outlier and novelty detection.
//!
//! Two from-scratch detectors are provided, both trained on a batch of
//! [`FeatureRow`]s and thresholded by the contamination factor: an isolation
//! forest ([`IForestModel`]) that isolates global extremes, and a local
//! outlier factor model ([`LofModel`]) that reacts to anomalous local
//! density. [`forecast_band_novelty`] is the rule used by the streaming
//! pipeline against a short-term forecast.

mod iforest;
mod lof;

pub use iforest::{average_path_length, harmonic, iforest_train, IForestModel, IForestParams};
pub use lof::{lof_scores, lof_train, LofModel, LofParams};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::time::Timestamp;

/// One feature vector. Rows fed to one model share the same arity.
pub type FeatureRow<T> = Vec<T>;

#[derive(Debug, thiserror::Error)]
pub enum AnomalyError {
    #[error("training error: {0}")]
    Training(String),
    #[error("row has {got} features, model expects {expected}")]
    Arity { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = AnomalyError> = std::result::Result<T, E>;

/// Default time-series features: the value and the fractional hour of day.
pub fn time_series_features<T: Scalar>(value: T, at: Timestamp) -> FeatureRow<T> {
    vec![value, T::lit(at.fractional_hour_of_day())]
}

/// True iff `|observed - forecast| > kappa * sigma`.
pub fn forecast_band_novelty<T: Scalar>(observed: T, forecast: T, sigma: T, kappa: T) -> bool {
    (observed - forecast).abs() > kappa * sigma
}

pub(crate) fn check_rows<T: Scalar>(rows: &[FeatureRow<T>]) -> Result<usize> {
    let arity = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| AnomalyError::Training("no training rows".into()))?;
    if arity == 0 {
        return Err(AnomalyError::Training("rows have no features".into()));
    }
    for row in rows {
        if row.len() != arity {
            return Err(AnomalyError::Arity {
                expected: arity,
                got: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(AnomalyError::Training("non-finite feature value".into()));
        }
    }
    Ok(arity)
}

pub(crate) fn check_contamination(c: f64) -> Result<()> {
    if c > 0.0 && c < 0.5 {
        Ok(())
    } else {
        Err(AnomalyError::Domain(format!("contamination {c} outside (0, 0.5)")))
    }
}

/// Score threshold leaving a `contamination` share of `scores` at or above
/// it.
///
/// The flagged count is `round(contamination * n)`; the threshold sits at the
/// midpoint between the lowest flagged score and the highest unflagged one.
/// When these two tie, the whole tied group stays unflagged.
pub fn contamination_threshold<T: Scalar>(scores: &[T], contamination: f64) -> T {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    let flagged = ((contamination * n as f64).round() as usize).min(n);
    let two = T::lit(2.0);
    let above_max = |v: T| v + v.abs().max(T::one());
    if flagged == 0 {
        return sorted.last().map_or(T::infinity(), |&v| above_max(v));
    }
    let pivot = sorted[n - flagged];
    if flagged == n {
        return pivot - pivot.abs().max(T::one());
    }
    let below = sorted[n - flagged - 1];
    if below < pivot {
        return (below + pivot) / two;
    }
    match sorted[n - flagged..].iter().find(|&&v| v > pivot) {
        Some(&next) => (pivot + next) / two,
        None => above_max(pivot),
    }
}

/// Per-feature z-score scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(rows: &[FeatureRow<T>]) -> Self {
        let arity = rows.first().map_or(0, Vec::len);
        let n = T::from_usize_lossy(rows.len().max(1));
        let mean: Vec<T> = (0..arity)
            .map(|j| rows.iter().map(|r| r[j]).sum::<T>() / n)
            .collect();
        let std = (0..arity)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<T>() / n;
                let s = var.sqrt();
                if s > T::zero() {
                    s
                } else {
                    T::one()
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, row: &[T]) -> FeatureRow<T> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }
}

pub(crate) fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}
