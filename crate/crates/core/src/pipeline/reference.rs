use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::entity::GeoPoint;
use crate::time::Timestamp;

use super::CurateError;

/// Source of trusted reference values for the accuracy dimension.
pub trait ReferenceProvider: Send + Sync {
    fn reference(&self, phenomenon: &str, location: GeoPoint, at: Timestamp) -> Option<f64>;
}

/// Provider that never resolves; accuracy is then omitted.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoReference;

impl ReferenceProvider for NoReference {
    fn reference(&self, _: &str, _: GeoPoint, _: Timestamp) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRecord {
    pub observed_at: Timestamp,
    pub location: GeoPoint,
    pub value: f64,
}

/// Table of reference records; a lookup returns the record nearest in time
/// within the tolerance, closest station first on equal time distance.
#[derive(Debug, Clone)]
pub struct ReferenceTable {
    records: Vec<ReferenceRecord>,
    tolerance_ms: i64,
}

#[derive(Deserialize)]
struct ReferenceRow {
    observed_at: String,
    lat: f64,
    lon: f64,
    value: f64,
}

impl ReferenceTable {
    pub const DEFAULT_TOLERANCE_SECONDS: f64 = 1800.0;

    pub fn new(mut records: Vec<ReferenceRecord>, tolerance_seconds: f64) -> Self {
        records.sort_by_key(|r| r.observed_at);
        Self {
            records,
            tolerance_ms: (tolerance_seconds * 1000.0).round() as i64,
        }
    }

    /// Reads CSV with header `observed_at,lat,lon,value`.
    pub fn from_csv_reader(reader: impl Read, tolerance_seconds: f64) -> Result<Self, CurateError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize::<ReferenceRow>().enumerate() {
            let row = row?;
            let bad = |m: String| CurateError::Input(format!("reference row {}: {m}", i + 1));
            let observed_at = Timestamp::parse_iso(&row.observed_at).map_err(|e| bad(e.to_string()))?;
            let location = GeoPoint::new(row.lat, row.lon).map_err(|e| bad(e.to_string()))?;
            if !row.value.is_finite() {
                return Err(bad("value is not finite".into()));
            }
            records.push(ReferenceRecord {
                observed_at,
                location,
                value: row.value,
            });
        }
        Ok(Self::new(records, tolerance_seconds))
    }

    pub fn from_csv_path(path: impl AsRef<Path>, tolerance_seconds: f64) -> Result<Self, CurateError> {
        Self::from_csv_reader(std::fs::File::open(path)?, tolerance_seconds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ReferenceProvider for ReferenceTable {
    fn reference(&self, _phenomenon: &str, location: GeoPoint, at: Timestamp) -> Option<f64> {
        let lo = at.plus_millis(-self.tolerance_ms);
        let hi = at.plus_millis(self.tolerance_ms);
        let start = self.records.partition_point(|r| r.observed_at < lo);
        self.records[start..]
            .iter()
            .take_while(|r| r.observed_at <= hi)
            .min_by(|a, b| {
                let key = |r: &ReferenceRecord| {
                    ((r.observed_at.millis() - at.millis()).abs(), r.location.haversine_m(&location))
                };
                let (ka, kb) = (key(a), key(b));
                ka.0.cmp(&kb.0)
                    .then(ka.1.partial_cmp(&kb.1).unwrap_or(std::cmp::Ordering::Equal))
                    .then(a.observed_at.cmp(&b.observed_at))
            })
            .map(|r| r.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_in_time_within_tolerance() {
        let csv = "observed_at,lat,lon,value\n\
                   2024-01-01T00:00:00Z,43.46,-3.80,10.0\n\
                   2024-01-01T01:00:00Z,43.46,-3.80,11.0\n";
        let table = ReferenceTable::from_csv_reader(csv.as_bytes(), 1800.0).unwrap();
        let here = GeoPoint::new(43.46, -3.80).unwrap();
        let at = |s: &str| Timestamp::parse_iso(s).unwrap();
        assert_eq!(table.reference("T", here, at("2024-01-01T00:20:00Z")), Some(10.0));
        assert_eq!(table.reference("T", here, at("2024-01-01T00:40:00Z")), Some(11.0));
        // Equidistant: earlier record wins.
        assert_eq!(table.reference("T", here, at("2024-01-01T00:30:00Z")), Some(10.0));
        assert_eq!(table.reference("T", here, at("2024-01-01T02:00:01Z")), None);
        assert_eq!(NoReference.reference("T", here, at("2024-01-01T00:00:00Z")), None);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let csv = "observed_at,lat,lon,value\nyesterday,43.46,-3.80,10.0\n";
        assert!(ReferenceTable::from_csv_reader(csv.as_bytes(), 1800.0).is_err());
    }
}
