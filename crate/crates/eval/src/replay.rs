//! Replaying a recorded observation stream through the curator, and the
//! reference replay fixture.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use dqcurate_core::forecast::{sarima_fit, SarimaSpec};
use dqcurate_core::pipeline::io::{build_curator, curate_all, load_config, read_observations_csv, write_observations_csv, write_pairs_jsonl};
use dqcurate_core::pipeline::{observation_id, ForecastTable, PipelineConfig};
use dqcurate_core::time::MILLIS_PER_HOUR;
use dqcurate_core::{ContextStore, GeoPoint, Observation, SeriesPoint, Timestamp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};
use crate::sim::{signal, CENTER, NOISE_SIGMA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub input: usize,
    pub emitted: usize,
    pub synthetic: usize,
    pub outliers: usize,
}

/// Curates every observation of `input` in file order and writes the
/// emitted pairs as JSON lines to `out`.
pub fn replay(input: &Path, config: Option<&Path>, out: &Path) -> Result<ReplaySummary> {
    let (cfg, base) = match config {
        Some(p) => (load_config(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (PipelineConfig::default(), Default::default()),
    };
    let observations = read_observations_csv(fs::File::open(input)?, &cfg.entity_type)?;
    let input_len = observations.len();
    let curator = build_curator(cfg, Arc::new(ContextStore::default()), &base)?;
    let pairs = curate_all(&curator, observations)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_pairs_jsonl(BufWriter::new(fs::File::create(out)?), &pairs)?;
    Ok(ReplaySummary {
        input: input_len,
        emitted: pairs.len(),
        synthetic: pairs.iter().filter(|p| p.assessment.synthetic.is_synthetic).count(),
        outliers: pairs.iter().filter(|p| p.assessment.outlier.is_outlier).count(),
    })
}

pub const FIXTURE_SENSOR: &str = "fixture-01";
pub const FIXTURE_ITEMS: usize = 90;
/// Items dropped from the stream: one gap of three cadence intervals.
pub const FIXTURE_GAP: [usize; 2] = [40, 41];
pub const FIXTURE_SPIKE: usize = 60;
pub const FIXTURE_SPIKE_SIGMAS: f64 = 4.0;

/// Writes `sarima.json`, `pipeline.toml` and `stream.csv` into `dir`: a
/// forecast model trained on ten days of hourly history and a 2-minute
/// stream over the following hours containing one three-interval gap and
/// one 4-sigma spike.
pub fn write_replay_fixture(dir: &Path, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
    let start = Timestamp::parse_iso("2024-05-01T00:00:00Z").expect("valid literal");
    let history: Vec<SeriesPoint> = (0..240)
        .map(|h| {
            let t = start.plus_millis(h * MILLIS_PER_HOUR);
            SeriesPoint::new(t, signal(t) + noise.sample(&mut rng))
        })
        .collect();
    let model = sarima_fit(&history, SarimaSpec::hourly_default()).map_err(EvalError::invalid)?;
    let table = ForecastTable::from_model(&model, 24);

    let cfg = PipelineConfig {
        forecast_model: Some("sarima.json".into()),
        forecast_horizon: 24,
        ..PipelineConfig::default()
    };
    let step = (cfg.nominal_rate_seconds * 1000.0) as i64;
    let first = model.last_t.plus_millis(MILLIS_PER_HOUR);
    let location = GeoPoint::new(CENTER.0, CENTER.1).expect("valid centre");
    let jitter = Normal::new(0.0, 0.2).expect("positive sigma");
    let mut stream = Vec::new();
    for i in 0..FIXTURE_ITEMS {
        if FIXTURE_GAP.contains(&i) {
            continue;
        }
        let t = first.plus_millis(i as i64 * step);
        let e = table.at(t).ok_or_else(|| EvalError::invalid("stream outside the forecast"))?;
        let value = if i == FIXTURE_SPIKE {
            e.value + FIXTURE_SPIKE_SIGMAS * e.sigma
        } else {
            e.value + jitter.sample(&mut rng) * e.sigma
        };
        // Two decimals, as a sensor would report.
        let value = (value * 100.0).round() / 100.0;
        stream.push(Observation::new(
            observation_id(&cfg.entity_type, FIXTURE_SENSOR),
            cfg.entity_type.clone(),
            value,
            "CEL",
            t,
            location,
            FIXTURE_SENSOR,
        ));
    }

    fs::create_dir_all(dir)?;
    fs::write(dir.join("sarima.json"), model.to_json().map_err(EvalError::invalid)?)?;
    fs::write(dir.join("pipeline.toml"), toml::to_string(&cfg).map_err(EvalError::invalid)?)?;
    write_observations_csv(fs::File::create(dir.join("stream.csv"))?, &stream)?;
    Ok(())
}
