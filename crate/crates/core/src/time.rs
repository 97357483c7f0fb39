use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// UTC instant with millisecond resolution, stored as milliseconds since the
/// Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

#[derive(Debug, thiserror::Error)]
#[error("invalid timestamp `{0}`")]
pub struct TimestampParseError(String);

pub const MILLIS_PER_SECOND: i64 = 1_000;
pub const MILLIS_PER_HOUR: i64 = 3_600_000;

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Self(ms)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        Self((secs * 1_000.0).round() as i64)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn secs_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Self(self.0 + ms)
    }

    pub fn plus_secs(self, secs: f64) -> Self {
        Self(self.0 + (secs * 1_000.0).round() as i64)
    }

    /// Signed difference `self - earlier` in seconds.
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1_000.0
    }

    /// Start of the UTC hour containing this instant.
    pub fn floor_hour(self) -> Self {
        Self(self.0.div_euclid(MILLIS_PER_HOUR) * MILLIS_PER_HOUR)
    }

    /// Hour of day in `[0, 24)` including the fractional part.
    pub fn fractional_hour_of_day(self) -> f64 {
        let ms_of_day = self.0.rem_euclid(24 * MILLIS_PER_HOUR);
        ms_of_day as f64 / MILLIS_PER_HOUR as f64
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(self.0)
            .single()
            .unwrap_or(DateTime::<Utc>::MIN_UTC)
    }

    /// ISO-8601 form with millisecond precision and a `Z` suffix.
    pub fn to_iso(self) -> String {
        self.to_datetime()
            .to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    pub fn parse_iso(s: &str) -> Result<Self, TimestampParseError> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Self(dt.with_timezone(&Utc).timestamp_millis()));
        }
        // Naive forms are taken as UTC.
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Self(naive.and_utc().timestamp_millis()));
            }
        }
        Err(TimestampParseError(s.to_string()))
    }
}

impl From<DateTime<Utc>> for Timestamp {
    fn from(dt: DateTime<Utc>) -> Self {
        Self(dt.timestamp_millis())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_iso(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse_iso(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_round_trip_keeps_millis() {
        let ts = Timestamp::parse_iso("2016-11-03T10:42:07.123Z").unwrap();
        assert_eq!(ts.to_iso(), "2016-11-03T10:42:07.123Z");
        assert_eq!(Timestamp::parse_iso(&ts.to_iso()).unwrap(), ts);
    }

    #[test]
    fn offsets_normalise_to_utc() {
        let a = Timestamp::parse_iso("2016-11-03T12:00:00+02:00").unwrap();
        let b = Timestamp::parse_iso("2016-11-03T10:00:00Z").unwrap();
        assert_eq!(a, b);
        assert_eq!(Timestamp::parse_iso("2016-11-03 10:00:00").unwrap(), b);
    }

    #[test]
    fn hour_helpers() {
        let ts = Timestamp::parse_iso("2016-11-03T10:30:00Z").unwrap();
        assert_eq!(ts.floor_hour().to_iso(), "2016-11-03T10:00:00.000Z");
        assert!((ts.fractional_hour_of_day() - 10.5).abs() < 1e-12);
        let before_epoch = Timestamp::from_millis(-1);
        assert_eq!(before_epoch.floor_hour().millis(), -MILLIS_PER_HOUR);
    }
}
