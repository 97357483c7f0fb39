//! Domain-knowledge cleaning for building the training series: value bounds,
//! geographic bounding box and pooled hourly aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::entity::{GeoPoint, Observation};
use crate::imputation::TimeSeriesPoint;
use crate::scalar::Scalar;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid filter: {0}")]
pub struct FilterError(String);

/// Keeps observations with value in the closed range `[min, max]`.
pub fn filter_nonsense(
    obs: Vec<Observation>,
    min: f64,
    max: f64,
) -> Result<(Vec<Observation>, Vec<Observation>), FilterError> {
    if !(min < max) {
        return Err(FilterError(format!("min {min} must be below max {max}")));
    }
    Ok(obs.into_iter().partition(|o| o.value >= min && o.value <= max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self, FilterError> {
        if !(lat_min < lat_max && lon_min < lon_max) {
            return Err(FilterError("bounding box has no area".into()));
        }
        Ok(Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.lat) && (self.lon_min..=self.lon_max).contains(&p.lon)
    }
}

/// Keeps observations located inside the closed box.
pub fn filter_geo(obs: Vec<Observation>, bbox: &BoundingBox) -> (Vec<Observation>, Vec<Observation>) {
    obs.into_iter().partition(|o| bbox.contains(&o.location))
}

/// Mean value per UTC hour `[h, h+1)`, pooled across sensors. Empty hours
/// produce no point.
pub fn aggregate_hourly_points<T: Scalar>(points: &[TimeSeriesPoint<T>]) -> Vec<TimeSeriesPoint<T>> {
    let mut buckets: BTreeMap<Timestamp, (T, usize)> = BTreeMap::new();
    for p in points {
        let e = buckets.entry(p.t.floor_hour()).or_insert((T::zero(), 0));
        e.0 += p.v;
        e.1 += 1;
    }
    buckets
        .into_iter()
        .map(|(t, (sum, n))| TimeSeriesPoint::new(t, sum / T::from_usize_lossy(n)))
        .collect()
}

pub fn aggregate_hourly(obs: &[Observation]) -> Vec<TimeSeriesPoint<f64>> {
    let points: Vec<TimeSeriesPoint<f64>> = obs
        .iter()
        .map(|o| TimeSeriesPoint::new(o.observed_at, o.value))
        .collect();
    aggregate_hourly_points(&points)
}
