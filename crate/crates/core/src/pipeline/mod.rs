//! The curation module: for every incoming observation it
//!
//! 1. fills any loss since the sensor's previous observation with synthetic
//!    observations (each of which goes through steps 2–4 first),
//! 2. tags the observation as outlier or inlier with the configured
//!    novelty detector,
//! 3. computes accuracy, timeliness, completeness and precision,
//! 4. stores the assessment and the linked observation together.
//!
//! All per-sensor state (previous timestamp, running timeliness, synthetic
//! history) is read back from the [`ContextStore`], so observations of one
//! sensor must be processed in order, while different sensors may be
//! processed concurrently.

mod forecaster;
pub mod io;
mod reference;

pub use forecaster::{Expectation, ForecastTable};
pub use reference::{NoReference, ReferenceProvider, ReferenceRecord, ReferenceTable};

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::anomaly::{self, IForestModel, LofModel};
use crate::entity::{
    self, Dimension, DqAssessment, DqProperty, EntityError, Observation, OutlierTag, SyntheticTag, UNIT_ONE,
    UNIT_SECOND,
};
use crate::imputation::{self, TimeSeriesPoint};
use crate::metrics::{self, CompletenessInputs, MetricError, TimelinessState};
use crate::store::{ContextStore, QueryError, Selector, StoreError, TemporalQuery};
use crate::time::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum CurateError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Entity(#[from] EntityError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CurateError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    #[default]
    ForecastBand,
    Iforest,
    Lof,
}

/// Every tunable of the curator. Loadable from a TOML key-value file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Expected cadence of every sensor.
    pub nominal_rate_seconds: f64,
    /// Inter-arrival times up to `loss_factor * rate` are not losses.
    pub loss_factor: f64,
    pub completeness_window_seconds: f64,
    /// History weight of the running timeliness mean.
    pub alpha: f64,
    pub precision_radius_m: f64,
    pub detector: DetectorKind,
    pub kappa: f64,
    pub entity_type: String,
    pub source: String,
    pub reference_tolerance_seconds: f64,
    pub forecast_model: Option<String>,
    /// Forecast steps kept from the SARIMA model.
    pub forecast_horizon: usize,
    pub iforest_model: Option<String>,
    pub lof_model: Option<String>,
    pub reference_file: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nominal_rate_seconds: 120.0,
            loss_factor: 1.5,
            completeness_window_seconds: 7200.0,
            alpha: 0.8,
            precision_radius_m: 1000.0,
            detector: DetectorKind::ForecastBand,
            kappa: 3.0,
            entity_type: "Temperature".into(),
            source: "dqcurate".into(),
            reference_tolerance_seconds: ReferenceTable::DEFAULT_TOLERANCE_SECONDS,
            forecast_model: None,
            forecast_horizon: 24 * 14,
            iforest_model: None,
            lof_model: None,
            reference_file: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nominal_rate_seconds", self.nominal_rate_seconds),
            ("completeness_window_seconds", self.completeness_window_seconds),
            ("precision_radius_m", self.precision_radius_m),
            ("kappa", self.kappa),
            ("reference_tolerance_seconds", self.reference_tolerance_seconds),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CurateError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.loss_factor > 1.0) {
            return Err(CurateError::Config(format!(
                "loss_factor must exceed 1, got {}",
                self.loss_factor
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CurateError::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| CurateError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Records fetched for completeness: one window's worth of nominal ticks.
    pub fn completeness_records(&self) -> usize {
        ((self.completeness_window_seconds / self.nominal_rate_seconds).round() as usize).max(1)
    }

    fn rate_ms(&self) -> i64 {
        (self.nominal_rate_seconds * 1000.0).round() as i64
    }
}

/// Novelty detector applied in step 2.
#[derive(Debug, Clone)]
pub enum Detector {
    ForecastBand { kappa: f64 },
    IForest(Arc<IForestModel<f64>>),
    Lof(Arc<LofModel<f64>>),
}

impl Detector {
    pub fn methodology(&self) -> String {
        match self {
            Detector::ForecastBand { kappa } => format!("forecast-band(kappa={kappa})"),
            Detector::IForest(m) => m.methodology(),
            Detector::Lof(m) => m.methodology(),
        }
    }
}

/// Time spent fetching inputs and computing one dimension, seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub requesting: f64,
    pub processing: f64,
}

impl PhaseTiming {
    pub fn total(&self) -> f64 {
        self.requesting + self.processing
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DimensionTimings {
    pub accuracy: PhaseTiming,
    pub completeness: PhaseTiming,
    pub timeliness: PhaseTiming,
    pub precision: PhaseTiming,
}

impl DimensionTimings {
    pub fn get(&self, dim: Dimension) -> PhaseTiming {
        match dim {
            Dimension::Accuracy => self.accuracy,
            Dimension::Completeness => self.completeness,
            Dimension::Timeliness => self.timeliness,
            Dimension::Precision => self.precision,
        }
    }
}

/// One emitted observation with its assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct CuratedPair {
    pub observation: Observation,
    pub assessment: DqAssessment,
    pub timings: DimensionTimings,
    /// Records returned by the completeness history query.
    pub completeness_records: usize,
    /// Neighbour records returned by the precision query.
    pub precision_records: usize,
}

/// All pairs produced by one incoming observation, ascending by time; the
/// last one is the real observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CurationResult {
    pub pairs: Vec<CuratedPair>,
}

impl CurationResult {
    pub fn real(&self) -> &CuratedPair {
        self.pairs.last().expect("a curation result always holds the real observation")
    }

    pub fn synthetic_count(&self) -> usize {
        self.pairs.len() - 1
    }
}

/// Timestamps of the ticks missed between `last` and `current`: none when
/// `current - last <= loss_factor * rate`, otherwise `round(dt / rate) - 1`
/// ticks at `last + i * rate`.
pub fn missing_ticks(last: Option<Timestamp>, current: Timestamp, config: &PipelineConfig) -> Vec<Timestamp> {
    let Some(last) = last else { return Vec::new() };
    let dt = current.secs_since(last);
    let rate = config.nominal_rate_seconds;
    if dt <= config.loss_factor * rate {
        return Vec::new();
    }
    let count = (dt / rate).round() as i64 - 1;
    (1..=count)
        .map(|i| last.plus_millis(i * config.rate_ms()))
        .filter(|&t| t < current)
        .collect()
}

/// Identifier of the assessment entity linked to a sensor's observations.
pub fn assessment_id(obs: &Observation) -> String {
    format!("urn:ngsi-ld:{}:{}", entity::ASSESSMENT_TYPE, obs.source_sensor)
}

/// Observation entity identifier for a sensor.
pub fn observation_id(entity_type: &str, sensor: &str) -> String {
    format!("urn:ngsi-ld:{entity_type}:{sensor}")
}

const INTERPOLATION_METHODOLOGY: &str = "poly-interpolation(degree=2,window=6)";

pub struct Curator {
    config: PipelineConfig,
    store: Arc<ContextStore>,
    detector: Detector,
    forecast: Option<Arc<ForecastTable>>,
    reference: Arc<dyn ReferenceProvider>,
}

impl Curator {
    pub fn new(config: PipelineConfig, store: Arc<ContextStore>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            detector: Detector::ForecastBand { kappa: config.kappa },
            config,
            store,
            forecast: None,
            reference: Arc::new(NoReference),
        })
    }

    pub fn with_forecast(mut self, table: Arc<ForecastTable>) -> Self {
        self.forecast = Some(table);
        self
    }

    pub fn with_detector(mut self, detector: Detector) -> Self {
        self.detector = detector;
        self
    }

    pub fn with_reference(mut self, reference: Arc<dyn ReferenceProvider>) -> Self {
        self.reference = reference;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn store(&self) -> &Arc<ContextStore> {
        &self.store
    }

    /// Synthetic observations for the ticks lost before `obs`.
    pub fn loss_manager(&self, obs: &Observation) -> Vec<(Observation, String)> {
        let last = self.store.latest(&obs.id).map(|r| r.observed_at);
        let ticks = missing_ticks(last, obs.observed_at, &self.config);
        if ticks.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(ticks.len());
        let mut unresolved = Vec::new();
        for &t in &ticks {
            match self.forecast.as_ref().and_then(|f| f.at(t).map(|e| (e, f.methodology()))) {
                Some((e, m)) => out.push((t, Some((e.value, m.to_string())))),
                None => {
                    unresolved.push(t);
                    out.push((t, None));
                }
            }
        }
        let interpolated = if unresolved.is_empty() {
            Vec::new()
        } else {
            self.interpolate(obs, &unresolved)
        };
        let mut interpolated = interpolated.into_iter();
        out.into_iter()
            .map(|(t, known)| {
                let (value, methodology) = known.unwrap_or_else(|| {
                    (
                        interpolated.next().unwrap_or(obs.value),
                        INTERPOLATION_METHODOLOGY.to_string(),
                    )
                });
                let mut synthetic = obs.clone();
                synthetic.value = value;
                synthetic.observed_at = t;
                synthetic.has_quality = None;
                (synthetic, methodology)
            })
            .collect()
    }

    fn interpolate(&self, obs: &Observation, gaps: &[Timestamp]) -> Vec<f64> {
        let query = TemporalQuery::last_n(Selector::EntityId(obs.id.clone()), 5);
        let mut known: Vec<TimeSeriesPoint<f64>> = self
            .store
            .temporal(&query)
            .unwrap_or_default()
            .iter()
            .map(|r| TimeSeriesPoint::new(r.observed_at, r.value))
            .collect();
        known.push(TimeSeriesPoint::new(obs.observed_at, obs.value));
        imputation::interpolate_poly(&known, gaps, 2, 6).unwrap_or_else(|_| vec![obs.value; gaps.len()])
    }

    /// Outlier verdict and methodology; `None` methodology when no verdict
    /// could be reached.
    pub fn detect(&self, obs: &Observation) -> Result<(bool, String)> {
        let features = || anomaly::time_series_features(obs.value, obs.observed_at);
        let map_err = |e: anomaly::AnomalyError| CurateError::Config(e.to_string());
        Ok(match &self.detector {
            Detector::ForecastBand { kappa } => match self.forecast.as_ref().and_then(|f| f.at(obs.observed_at)) {
                Some(e) if e.sigma > 0.0 => (
                    anomaly::forecast_band_novelty(obs.value, e.value, e.sigma, *kappa),
                    self.detector.methodology(),
                ),
                _ => (false, String::new()),
            },
            Detector::IForest(m) => (m.is_outlier(&features()).map_err(map_err)?, self.detector.methodology()),
            Detector::Lof(m) => (m.is_novelty(&features()).map_err(map_err)?, self.detector.methodology()),
        })
    }

    /// Neighbouring inlier values for the precision dimension.
    pub fn precision_inputs(&self, obs: &Observation) -> Result<(Vec<f64>, usize)> {
        let mut values = Vec::new();
        let fetched = self.store.visit_nearby_latest(
            &obs.entity_type,
            obs.location,
            self.config.precision_radius_m,
            Some(&obs.id),
            |rec, linked| {
                if linked.and_then(|l| l.flags).is_some_and(|f| !f.is_outlier) {
                    values.push(rec.value);
                }
            },
        )?;
        Ok((values, fetched))
    }

    fn assess(&self, obs: Observation, synthetic_methodology: Option<String>) -> Result<CuratedPair> {
        let now = obs.observed_at;
        let dqa_id = assessment_id(&obs);
        let mut timings = DimensionTimings::default();

        let (is_outlier, outlier_methodology) = self.detect(&obs)?;

        // Accuracy
        let clock = Instant::now();
        let reference = self.reference.reference(&obs.entity_type, obs.location, now);
        timings.accuracy.requesting = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let accuracy = reference
            .map(|r| metrics::accuracy(obs.value, r))
            .transpose()?
            .map(|v| DqProperty::new(v, now, obs.unit_code.clone()));
        timings.accuracy.processing = clock.elapsed().as_secs_f64();

        // Timeliness
        let clock = Instant::now();
        let previous = self
            .store
            .visit_latest(&dqa_id, |r| r.entity.as_assessment().map(|a| (a.timeliness.value, a.date_calculated)))
            .flatten();
        timings.timeliness.requesting = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let (timeliness, first) = match previous {
            Some((mean, last)) => {
                let state = TimelinessState::new(mean, last, self.config.alpha)?;
                (metrics::timeliness_update(state, now)?.1, false)
            }
            None => (self.config.nominal_rate_seconds, true),
        };
        timings.timeliness.processing = clock.elapsed().as_secs_f64();

        // Completeness
        let clock = Instant::now();
        let mut missed = 0;
        let fetched = self.store.visit_last_n(&dqa_id, self.config.completeness_records(), |r| {
            if r.flags.is_some_and(|f| f.is_synthetic) {
                missed += 1;
            }
        });
        timings.completeness.requesting = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        // A zero running mean (duplicate timestamps) falls back to the nominal rate.
        let rate = if timeliness > 0.0 { timeliness } else { self.config.nominal_rate_seconds };
        let completeness = metrics::completeness(CompletenessInputs {
            window_seconds: self.config.completeness_window_seconds,
            rate_seconds: rate,
            missed_count: missed,
        })?;
        timings.completeness.processing = clock.elapsed().as_secs_f64();

        // Precision
        let clock = Instant::now();
        let (neighbours, precision_records) = self.precision_inputs(&obs)?;
        timings.precision.requesting = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let precision = match metrics::precision(obs.value, &neighbours) {
            Ok(v) => Some(DqProperty::new(v, now, obs.unit_code.clone())),
            Err(MetricError::InsufficientData) => None,
            Err(e) => return Err(e.into()),
        };
        timings.precision.processing = clock.elapsed().as_secs_f64();

        let source = if first {
            format!("{};timeliness=nominal-init", self.config.source)
        } else {
            self.config.source.clone()
        };
        let is_synthetic = synthetic_methodology.is_some();
        let assessment = DqAssessment {
            id: dqa_id,
            source,
            date_calculated: now,
            accuracy,
            completeness: DqProperty::new(completeness, now, UNIT_ONE),
            timeliness: DqProperty::new(timeliness, now, UNIT_SECOND),
            precision,
            outlier: OutlierTag {
                is_outlier,
                methodology: outlier_methodology,
                observed_at: now,
            },
            synthetic: SyntheticTag {
                is_synthetic,
                methodology: synthetic_methodology.unwrap_or_else(|| "none".into()),
                observed_at: now,
            },
            extra: Default::default(),
        };
        let observation = entity::link_quality(&obs, &assessment);
        self.store
            .upsert_all(vec![assessment.clone().into(), observation.clone().into()])?;
        Ok(CuratedPair {
            observation,
            assessment,
            timings,
            completeness_records: fetched,
            precision_records,
        })
    }

    /// Runs the full curation flow for one incoming observation.
    pub fn process_observation(&self, obs: Observation) -> Result<CurationResult> {
        obs.validate()?;
        if let Some(last) = self.store.latest(&obs.id) {
            if obs.observed_at <= last.observed_at {
                return Err(CurateError::Input(format!(
                    "observation of {} at {} does not follow {}",
                    obs.id, obs.observed_at, last.observed_at
                )));
            }
        }
        let mut pairs = Vec::new();
        for (synthetic, methodology) in self.loss_manager(&obs) {
            pairs.push(self.assess(synthetic, Some(methodology))?);
        }
        pairs.push(self.assess(obs, None)?);
        Ok(CurationResult { pairs })
    }
}
