//! Monte Carlo timing runs over a synthetic sensor network.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use dqcurate_core::entity::Dimension;
use dqcurate_core::forecast::ForecastStep;
use dqcurate_core::pipeline::{observation_id, Curator, ForecastTable, PipelineConfig, ReferenceRecord, ReferenceTable};
use dqcurate_core::time::MILLIS_PER_HOUR;
use dqcurate_core::{ContextStore, GeoPoint, Observation, Timestamp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};
use crate::report::{median_series, EvalReport, RunInfo};

/// Centre of the simulated deployment (Santander).
pub const CENTER: (f64, f64) = (43.4623, -3.80998);

pub const SIGNAL_MEAN: f64 = 15.0;
pub const SIGNAL_AMPLITUDE: f64 = 5.0;
pub const SIGNAL_PERIOD_HOURS: f64 = 24.0;
pub const NOISE_SIGMA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sensors: usize,
    pub cadence_seconds: f64,
    pub per_sensor: usize,
    pub rounds: usize,
    pub seed: u64,
    pub start: Timestamp,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sensors: 100,
            cadence_seconds: 120.0,
            per_sensor: 100,
            rounds: 5,
            seed: 7,
            start: Timestamp::parse_iso("2024-03-01T00:00:00Z").expect("valid literal"),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sensors == 0 || self.per_sensor == 0 || self.rounds == 0 {
            return Err(EvalError::invalid("sensors, count and rounds must be at least 1"));
        }
        if !(self.cadence_seconds > 0.0 && self.cadence_seconds.is_finite()) {
            return Err(EvalError::invalid(format!("cadence {} must be positive", self.cadence_seconds)));
        }
        Ok(())
    }

    pub fn items(&self) -> usize {
        self.sensors * self.per_sensor
    }

    fn run_info(&self) -> RunInfo {
        RunInfo {
            sensors: self.sensors,
            per_sensor: self.per_sensor,
            cadence_seconds: self.cadence_seconds,
            rounds: self.rounds,
            seed: self.seed,
        }
    }
}

/// Noise-free daily signal.
pub fn signal(t: Timestamp) -> f64 {
    SIGNAL_MEAN + SIGNAL_AMPLITUDE * (TAU * t.secs_f64() / (SIGNAL_PERIOD_HOURS * 3600.0)).sin()
}

/// Sensor positions scattered within about 1.5 km of [`CENTER`].
pub fn sensor_layout(sensors: usize, seed: u64) -> Vec<GeoPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a70);
    let dlat = 1500.0 / 111_320.0;
    let dlon = dlat / CENTER.0.to_radians().cos();
    (0..sensors)
        .map(|_| {
            let lat = CENTER.0 + rng.gen_range(-dlat..dlat);
            let lon = CENTER.1 + rng.gen_range(-dlon..dlon);
            GeoPoint::new(lat, lon).expect("inside valid range")
        })
        .collect()
}

pub fn sensor_name(i: usize) -> String {
    format!("sim-{i:04}")
}

/// The synthetic stream in arrival order: tick by tick, sensor by sensor.
pub fn generate_stream(cfg: &SimConfig) -> Vec<Observation> {
    let layout = sensor_layout(cfg.sensors, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
    let step = (cfg.cadence_seconds * 1000.0).round() as i64;
    let mut out = Vec::with_capacity(cfg.items());
    for tick in 0..cfg.per_sensor {
        let t = cfg.start.plus_millis(tick as i64 * step);
        for (s, &loc) in layout.iter().enumerate() {
            let name = sensor_name(s);
            out.push(Observation::new(
                observation_id("Temperature", &name),
                "Temperature",
                signal(t) + noise.sample(&mut rng),
                "CEL",
                t,
                loc,
                name,
            ));
        }
    }
    out
}

fn hours_spanned(cfg: &SimConfig) -> i64 {
    (cfg.per_sensor as f64 * cfg.cadence_seconds / 3600.0).ceil() as i64 + 2
}

/// Hourly reference station at [`CENTER`] reporting the noise-free signal.
pub fn reference_station(cfg: &SimConfig) -> ReferenceTable {
    let origin = cfg.start.floor_hour();
    let here = GeoPoint::new(CENTER.0, CENTER.1).expect("valid centre");
    let records = (0..=hours_spanned(cfg))
        .map(|h| {
            let t = origin.plus_millis(h * MILLIS_PER_HOUR);
            ReferenceRecord {
                observed_at: t,
                location: here,
                value: signal(t),
            }
        })
        .collect();
    ReferenceTable::new(records, ReferenceTable::DEFAULT_TOLERANCE_SECONDS)
}

/// Hourly expectation of the signal with the noise level as sigma.
pub fn climatology(cfg: &SimConfig) -> ForecastTable {
    let origin = cfg.start.floor_hour();
    let steps = (0..=hours_spanned(cfg))
        .map(|h| {
            let t = origin.plus_millis(h * MILLIS_PER_HOUR);
            ForecastStep {
                t,
                value: signal(t),
                sigma: NOISE_SIGMA,
            }
        })
        .collect();
    ForecastTable::new(steps, "climatology(period=24h)")
}

/// Timings of one curated item: (requesting, processing) per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemTiming {
    pub dims: [(f64, f64); 4],
    pub records_fetched: usize,
}

/// One clean-slate round over `stream`.
pub fn run_round(stream: &[Observation], curator_of: &dyn Fn(Arc<ContextStore>) -> Result<Curator>) -> Result<Vec<ItemTiming>> {
    let curator = curator_of(Arc::new(ContextStore::default()))?;
    let mut out = Vec::with_capacity(stream.len());
    for obs in stream {
        let result = curator.process_observation(obs.clone())?;
        let real = result.real();
        let mut dims = [(0.0, 0.0); 4];
        for (slot, dim) in dims.iter_mut().zip(Dimension::ALL) {
            let p = real.timings.get(dim);
            *slot = (p.requesting, p.processing);
        }
        out.push(ItemTiming {
            dims,
            records_fetched: real.completeness_records,
        });
    }
    Ok(out)
}

/// Runs `cfg.rounds` rounds and aggregates per-item medians.
pub fn simulate(cfg: &SimConfig, pipeline: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    pipeline.validate()?;
    let stream = generate_stream(cfg);
    let reference = Arc::new(reference_station(cfg));
    let forecast = Arc::new(climatology(cfg));
    let make = |store: Arc<ContextStore>| -> Result<Curator> {
        Ok(Curator::new(pipeline.clone(), store)?
            .with_reference(reference.clone())
            .with_forecast(forecast.clone()))
    };
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        rounds.push(run_round(&stream, &make)?);
    }
    Ok(aggregate(cfg.run_info(), &rounds))
}

/// Folds per-round item timings into an [`EvalReport`].
pub fn aggregate(run: RunInfo, rounds: &[Vec<ItemTiming>]) -> EvalReport {
    let mut timings = BTreeMap::new();
    for (d, dim) in Dimension::ALL.into_iter().enumerate() {
        let per_round: Vec<Vec<(f64, f64)>> = rounds
            .iter()
            .map(|r| r.iter().map(|it| it.dims[d]).collect())
            .collect();
        timings.insert(dim.key().to_string(), median_series(&per_round));
    }
    EvalReport {
        run,
        timings,
        records_fetched: rounds
            .first()
            .map(|r| r.iter().map(|it| it.records_fetched).collect())
            .unwrap_or_default(),
        overheads: Vec::new(),
        metrics: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke() -> SimConfig {
        SimConfig {
            sensors: 2,
            per_sensor: 5,
            rounds: 1,
            ..SimConfig::default()
        }
    }

    #[test]
    fn smoke_scale_report() {
        let report = simulate(&smoke(), &PipelineConfig::default()).unwrap();
        assert_eq!(report.timings.len(), 4);
        assert!(report.timings.values().all(|rows| rows.len() == 10));
        assert_eq!(report.records_fetched, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
    }

    #[test]
    fn same_seed_same_values() {
        let a = generate_stream(&smoke());
        let b = generate_stream(&smoke());
        assert_eq!(a, b);
        let c = generate_stream(&SimConfig { seed: 8, ..smoke() });
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs() {
        assert!(SimConfig { rounds: 0, ..smoke() }.validate().is_err());
        assert!(SimConfig { cadence_seconds: 0.0, ..smoke() }.validate().is_err());
    }
}
