//! File formats around the curator: observation CSV in, JSON lines out,
//! TOML configuration and model documents.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::{Map, Value};

use super::{observation_id, CuratedPair, CurateError, Curator, Detector, DetectorKind, ForecastTable, PipelineConfig, ReferenceTable, Result};
use crate::anomaly::{IForestModel, LofModel};
use crate::entity::{self, Entity, GeoPoint, Observation};
use crate::forecast::SarimaModel;
use crate::store::ContextStore;
use crate::time::Timestamp;

#[derive(Deserialize)]
struct ObservationRow {
    sensor_id: String,
    observed_at: String,
    value: f64,
    unit: String,
    lat: f64,
    lon: f64,
}

/// Reads observations from CSV with header
/// `sensor_id,observed_at,value,unit,lat,lon`.
pub fn read_observations_csv(reader: impl Read, entity_type: &str) -> Result<Vec<Observation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ObservationRow>().enumerate() {
        let row = row?;
        let bad = |m: String| CurateError::Input(format!("observation row {}: {m}", i + 1));
        let observed_at = Timestamp::parse_iso(&row.observed_at).map_err(|e| bad(e.to_string()))?;
        let location = GeoPoint::new(row.lat, row.lon).map_err(|e| bad(e.to_string()))?;
        let obs = Observation::new(
            observation_id(entity_type, &row.sensor_id),
            entity_type,
            row.value,
            row.unit,
            observed_at,
            location,
            row.sensor_id,
        );
        obs.validate().map_err(|e| bad(e.to_string()))?;
        out.push(obs);
    }
    Ok(out)
}

pub fn write_observations_csv(writer: impl Write, observations: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sensor_id", "observed_at", "value", "unit", "lat", "lon"])?;
    for o in observations {
        w.write_record([
            o.source_sensor.clone(),
            o.observed_at.to_iso(),
            o.value.to_string(),
            o.unit_code.clone(),
            o.location.lat.to_string(),
            o.location.lon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One output line: `{"observation": ..., "assessment": ...}`.
pub fn pair_line(pair: &CuratedPair) -> Result<String> {
    let mut m = Map::new();
    m.insert(
        "observation".into(),
        entity::to_json_value(&Entity::Observation(pair.observation.clone()))?,
    );
    m.insert(
        "assessment".into(),
        entity::to_json_value(&Entity::Assessment(pair.assessment.clone()))?,
    );
    Ok(Value::Object(m).to_string())
}

pub fn write_pairs_jsonl<'a>(mut writer: impl Write, pairs: impl IntoIterator<Item = &'a CuratedPair>) -> Result<()> {
    for p in pairs {
        writeln!(writer, "{}", pair_line(p)?)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    PipelineConfig::from_toml_str(&std::fs::read_to_string(path)?)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn model_error(path: &Path, e: impl std::fmt::Display) -> CurateError {
    CurateError::Config(format!("{}: {e}", path.display()))
}

/// Builds a curator from a configuration, loading model and reference files
/// relative to `base_dir`.
pub fn build_curator(config: PipelineConfig, store: Arc<ContextStore>, base_dir: &Path) -> Result<Curator> {
    let mut curator = Curator::new(config.clone(), store)?;
    if let Some(p) = &config.forecast_model {
        let path = resolve(base_dir, p);
        let model = SarimaModel::<f64>::from_json(&std::fs::read_to_string(&path)?).map_err(|e| model_error(&path, e))?;
        curator = curator.with_forecast(Arc::new(ForecastTable::from_model(&model, config.forecast_horizon)));
    }
    let detector = match config.detector {
        DetectorKind::ForecastBand => Detector::ForecastBand { kappa: config.kappa },
        DetectorKind::Iforest => {
            let p = config
                .iforest_model
                .as_deref()
                .ok_or_else(|| CurateError::Config("detector iforest needs iforest_model".into()))?;
            let path = resolve(base_dir, p);
            let m = IForestModel::<f64>::from_json(&std::fs::read_to_string(&path)?).map_err(|e| model_error(&path, e))?;
            Detector::IForest(Arc::new(m))
        }
        DetectorKind::Lof => {
            let p = config
                .lof_model
                .as_deref()
                .ok_or_else(|| CurateError::Config("detector lof needs lof_model".into()))?;
            let path = resolve(base_dir, p);
            let m = LofModel::<f64>::from_json(&std::fs::read_to_string(&path)?).map_err(|e| model_error(&path, e))?;
            Detector::Lof(Arc::new(m))
        }
    };
    curator = curator.with_detector(detector);
    if let Some(p) = &config.reference_file {
        let table = ReferenceTable::from_csv_path(resolve(base_dir, p), config.reference_tolerance_seconds)?;
        curator = curator.with_reference(Arc::new(table));
    }
    Ok(curator)
}

/// Curates a whole input in order and returns every emitted pair.
pub fn curate_all(curator: &Curator, observations: Vec<Observation>) -> Result<Vec<CuratedPair>> {
    let mut out = Vec::with_capacity(observations.len());
    for obs in observations {
        out.extend(curator.process_observation(obs)?.pairs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let csv = "sensor_id,observed_at,value,unit,lat,lon\n\
                   s1,2024-01-01T00:00:00Z,21.5,CEL,43.46,-3.80\n\
                   s2,2024-01-01T00:02:00.250Z,19.0,CEL,43.47,-3.81\n";
        let obs = read_observations_csv(csv.as_bytes(), "Temperature").unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].id, "urn:ngsi-ld:Temperature:s1");
        assert_eq!(obs[1].observed_at.millis() % 1000, 250);
        let mut buf = Vec::new();
        write_observations_csv(&mut buf, &obs).unwrap();
        let again = read_observations_csv(buf.as_slice(), "Temperature").unwrap();
        assert_eq!(again, obs);
    }

    #[test]
    fn bad_rows_are_input_errors() {
        let csv = "sensor_id,observed_at,value,unit,lat,lon\ns1,2024-01-01T00:00:00Z,21.5,CEL,95.0,-3.80\n";
        assert!(matches!(
            read_observations_csv(csv.as_bytes(), "Temperature"),
            Err(CurateError::Input(_))
        ));
        let csv = "sensor_id,observed_at,value,unit,lat,lon\ns1,2024-01-01T00:00:00Z,warm,CEL,43.0,-3.80\n";
        assert!(matches!(read_observations_csv(csv.as_bytes(), "Temperature"), Err(CurateError::Csv(_))));
    }

    #[test]
    fn missing_detector_model_is_a_config_error() {
        let cfg = PipelineConfig {
            detector: DetectorKind::Lof,
            ..PipelineConfig::default()
        };
        let err = build_curator(cfg, Arc::new(ContextStore::default()), Path::new(".")).err().unwrap();
        assert!(matches!(err, CurateError::Config(_)));
    }
}
