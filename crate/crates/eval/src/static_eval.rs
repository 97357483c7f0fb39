//! Static-flow evaluation: cleaning, outlier removal, gap imputation and
//! forecast extension on a synthetic seasonal dataset with planted ground
//! truth.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::path::Path;

use dqcurate_core::anomaly::{
    contamination_threshold, iforest_train, lof_scores, time_series_features, FeatureRow, IForestParams, LofParams,
};
use dqcurate_core::forecast::{sarima_fit, SarimaSpec};
use dqcurate_core::imputation::{impute_knn, interpolate_poly, mae, mape, KnnWeighting};
use dqcurate_core::preprocess::filter_nonsense;
use dqcurate_core::time::MILLIS_PER_HOUR;
use dqcurate_core::{GeoPoint, Observation, SeriesPoint, Timestamp};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};
use crate::sim::{CENTER, NOISE_SIGMA, SIGNAL_AMPLITUDE, SIGNAL_MEAN, SIGNAL_PERIOD_HOURS};

pub const HOURLY_POINTS: usize = 1000;
pub const GLOBAL_SPIKES: usize = 35;
pub const LOCAL_ANOMALIES: usize = 6;
pub const FINE_POINTS: usize = 2000;
pub const FINE_CADENCE_SECONDS: i64 = 600;
pub const FINE_NOISE_SIGMA: f64 = 0.05;
pub const FINE_GAPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    /// Value outside the normal range of the whole series.
    Global,
    /// Value inside the normal range but far from the seasonal curve.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub t: Timestamp,
    pub value: f64,
    /// Value without the planted anomaly.
    pub truth: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub t: Timestamp,
    pub value: f64,
    /// Hidden from the imputers; `value` is the held-out truth.
    pub gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticDataset {
    pub seed: u64,
    /// Hourly series with planted anomalies.
    pub hourly: Vec<LabeledPoint>,
    /// Fine-cadence series with planted gaps.
    pub fine: Vec<GapPoint>,
}

fn phase(t: Timestamp) -> f64 {
    (TAU * t.secs_f64() / (SIGNAL_PERIOD_HOURS * 3600.0)).sin()
}

/// Seeded seasonal dataset: [`HOURLY_POINTS`] hourly values with
/// [`GLOBAL_SPIKES`] out-of-range spikes and [`LOCAL_ANOMALIES`] in-range
/// off-curve points, and a low-noise fine-cadence series with isolated gaps.
pub fn synthetic_dataset(seed: u64) -> StaticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
    let start = Timestamp::parse_iso("2024-01-01T00:00:00Z").expect("valid literal");
    let mut hourly: Vec<LabeledPoint> = (0..HOURLY_POINTS)
        .map(|i| {
            let t = start.plus_millis(i as i64 * MILLIS_PER_HOUR);
            let v = SIGNAL_MEAN + SIGNAL_AMPLITUDE * phase(t) + noise.sample(&mut rng);
            LabeledPoint {
                t,
                value: v,
                truth: v,
                label: Label::Normal,
            }
        })
        .collect();

    // Local anomalies sit at the daily extremes, pulled back to the mean.
    let extremes: Vec<usize> = (1..HOURLY_POINTS - 1)
        .filter(|&i| phase(hourly[i].t).abs() > 0.95)
        .collect();
    let mut taken = BTreeSet::new();
    for &i in extremes.choose_multiple(&mut rng, LOCAL_ANOMALIES) {
        let p = &mut hourly[i];
        p.value = SIGNAL_MEAN + rng.gen_range(-0.5..0.5);
        p.label = Label::Local;
        taken.insert(i);
    }
    // Global spikes go beyond the range on the side the curve is on.
    let candidates: Vec<usize> = (0..HOURLY_POINTS)
        .filter(|i| !taken.contains(i) && phase(hourly[*i].t).abs() > 0.7)
        .collect();
    for &i in candidates.choose_multiple(&mut rng, GLOBAL_SPIKES) {
        let p = &mut hourly[i];
        let side = phase(p.t).signum();
        p.value = SIGNAL_MEAN + side * (SIGNAL_AMPLITUDE + rng.gen_range(2.0..4.0));
        p.label = Label::Global;
    }

    let fine_noise = Normal::new(0.0, FINE_NOISE_SIGMA).expect("positive sigma");
    let mut fine: Vec<GapPoint> = (0..FINE_POINTS)
        .map(|i| {
            let t = start.plus_millis(i as i64 * FINE_CADENCE_SECONDS * 1000);
            GapPoint {
                t,
                value: SIGNAL_MEAN + SIGNAL_AMPLITUDE * phase(t) + fine_noise.sample(&mut rng),
                gap: false,
            }
        })
        .collect();
    // Isolated gaps: every hole has known neighbours on both sides.
    let slots: Vec<usize> = (1..FINE_POINTS / 2 - 1).map(|k| 2 * k + 1).collect();
    for &i in slots.choose_multiple(&mut rng, FINE_GAPS) {
        fine[i].gap = true;
    }
    StaticDataset { seed, hourly, fine }
}

pub fn load_dataset(path: &Path) -> Result<StaticDataset> {
    let ds: StaticDataset = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if ds.hourly.len() < 2 || ds.fine.len() < 2 {
        return Err(EvalError::invalid("dataset needs at least two points per series"));
    }
    Ok(ds)
}

/// Resolves `synthetic:<seed>` to a generated dataset, anything else to a
/// JSON file.
pub fn resolve_dataset(spec: &str) -> Result<StaticDataset> {
    match spec.strip_prefix("synthetic:") {
        Some(seed) => Ok(synthetic_dataset(
            seed.parse().map_err(|_| EvalError::invalid(format!("bad seed in {spec}")))?,
        )),
        None => load_dataset(Path::new(spec)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticEvalConfig {
    pub value_min: f64,
    pub value_max: f64,
    pub iforest: IForestParams,
    pub lof: LofParams,
    pub knn_k: usize,
    pub poly_degree: usize,
    pub poly_window: usize,
    pub sarima: SarimaSpec,
    pub horizon: usize,
}

impl Default for StaticEvalConfig {
    fn default() -> Self {
        Self {
            value_min: -10.0,
            value_max: 45.0,
            iforest: IForestParams::default(),
            lof: LofParams::outlier_mode(),
            knn_k: 5,
            poly_degree: 2,
            poly_window: 6,
            sarima: SarimaSpec::hourly_default(),
            horizon: 48,
        }
    }
}

impl StaticEvalConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(EvalError::invalid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub algorithm: String,
    pub flagged: usize,
    pub global_flagged: usize,
    pub local_flagged: usize,
    pub global_planted: usize,
    pub local_planted: usize,
    /// Recall on the planted global spikes.
    pub recall: f64,
    /// Share of flagged points that are planted anomalies of either kind.
    pub precision: f64,
    /// Indices of flagged points in the hourly series.
    pub flagged_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub method: String,
    pub points: usize,
    pub mape: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmMetrics {
    pub dropped_nonsense: usize,
    pub detection: Vec<DetectionMetrics>,
    pub imputation: Vec<ErrorMetrics>,
    pub forecast: ErrorMetrics,
}

fn detection_metrics(algorithm: String, flags: &[bool], labels: &[Label]) -> DetectionMetrics {
    let count = |l: Label| labels.iter().filter(|&&x| x == l).count();
    let hits = |l: Label| flags.iter().zip(labels).filter(|(&f, &x)| f && x == l).count();
    let flagged = flags.iter().filter(|&&f| f).count();
    let (global_flagged, local_flagged) = (hits(Label::Global), hits(Label::Local));
    let global_planted = count(Label::Global);
    DetectionMetrics {
        algorithm,
        flagged,
        global_flagged,
        local_flagged,
        global_planted,
        local_planted: count(Label::Local),
        recall: if global_planted == 0 { 1.0 } else { global_flagged as f64 / global_planted as f64 },
        precision: if flagged == 0 { 1.0 } else { (global_flagged + local_flagged) as f64 / flagged as f64 },
        flagged_indices: flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect(),
    }
}

fn to_observations(points: &[LabeledPoint]) -> Vec<Observation> {
    let here = GeoPoint::new(CENTER.0, CENTER.1).expect("valid centre");
    points
        .iter()
        .enumerate()
        .map(|(i, p)| Observation::new(format!("row-{i}"), "Temperature", p.value, "CEL", p.t, here, "static"))
        .collect()
}

/// Flags from an isolation forest trained on the series itself.
pub fn iforest_flags(rows: &[FeatureRow<f64>], params: &IForestParams) -> Result<(Vec<bool>, String)> {
    let model = iforest_train(rows, params.clone()).map_err(EvalError::invalid)?;
    let flags = rows
        .iter()
        .map(|r| model.is_outlier(r))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(EvalError::invalid)?;
    Ok((flags, model.methodology()))
}

/// Flags from the LOF of every row against the rest of the series.
pub fn lof_flags(rows: &[FeatureRow<f64>], params: &LofParams) -> Result<(Vec<bool>, String)> {
    let scores = lof_scores(rows, params.k).map_err(EvalError::invalid)?;
    let threshold = contamination_threshold(&scores, params.contamination);
    Ok((
        scores.iter().map(|&s| s >= threshold).collect(),
        format!("lof(k={},contamination={})", params.k, params.contamination),
    ))
}

/// Runs cleaning, detection, imputation and forecasting and scores each
/// stage against the planted truth.
pub fn static_flow_eval(ds: &StaticDataset, cfg: &StaticEvalConfig) -> Result<AlgorithmMetrics> {
    // Cleaning by physical bounds.
    let (kept, dropped) =
        filter_nonsense(to_observations(&ds.hourly), cfg.value_min, cfg.value_max).map_err(EvalError::invalid)?;
    let kept_idx: Vec<usize> = kept
        .iter()
        .map(|o| o.id["row-".len()..].parse().expect("generated id"))
        .collect();
    let points: Vec<LabeledPoint> = kept_idx.iter().map(|&i| ds.hourly[i]).collect();
    let labels: Vec<Label> = points.iter().map(|p| p.label).collect();
    let rows: Vec<FeatureRow<f64>> = points.iter().map(|p| time_series_features(p.value, p.t)).collect();

    // Detection.
    let (if_flags, if_name) = iforest_flags(&rows, &cfg.iforest)?;
    let (lof_flag, lof_name) = lof_flags(&rows, &cfg.lof)?;
    let detection = vec![
        detection_metrics(if_name, &if_flags, &labels),
        detection_metrics(lof_name, &lof_flag, &labels),
    ];

    // Gap imputation on the fine series.
    let known: Vec<SeriesPoint> = ds.fine.iter().filter(|p| !p.gap).map(|p| SeriesPoint::new(p.t, p.value)).collect();
    let holes: Vec<&GapPoint> = ds.fine.iter().filter(|p| p.gap).collect();
    let gap_t: Vec<Timestamp> = holes.iter().map(|p| p.t).collect();
    let truth: Vec<f64> = holes.iter().map(|p| p.value).collect();
    let score = |method: String, predicted: Vec<f64>| -> Result<ErrorMetrics> {
        Ok(ErrorMetrics {
            method,
            points: truth.len(),
            mape: mape(&truth, &predicted).map_err(EvalError::invalid)?,
            mae: mae(&truth, &predicted).map_err(EvalError::invalid)?,
        })
    };
    let poly = interpolate_poly(&known, &gap_t, cfg.poly_degree, cfg.poly_window).map_err(EvalError::invalid)?;
    let knn = impute_knn(&known, &gap_t, cfg.knn_k, KnnWeighting::Uniform).map_err(EvalError::invalid)?;
    let imputation = vec![
        score(format!("poly(degree={},window={})", cfg.poly_degree, cfg.poly_window), poly)?,
        score(format!("knn(k={})", cfg.knn_k), knn)?,
    ];

    // Forecast extension: outliers removed by the forest and refilled by
    // interpolation, last `horizon` hours held out.
    if points.len() <= cfg.horizon {
        return Err(EvalError::invalid("series shorter than the forecast horizon"));
    }
    let split = points.len() - cfg.horizon;
    let clean: Vec<SeriesPoint> = points[..split]
        .iter()
        .zip(&if_flags)
        .filter(|(_, &f)| !f)
        .map(|(p, _)| SeriesPoint::new(p.t, p.value))
        .collect();
    let grid: Vec<Timestamp> = points[..split].iter().map(|p| p.t).collect();
    let refill_at: Vec<Timestamp> = points[..split]
        .iter()
        .zip(&if_flags)
        .filter(|(_, &f)| f)
        .map(|(p, _)| p.t)
        .collect();
    let refill = interpolate_poly(&clean, &refill_at, cfg.poly_degree, cfg.poly_window).map_err(EvalError::invalid)?;
    let mut series = clean;
    series.extend(refill_at.iter().zip(refill).map(|(&t, v)| SeriesPoint::new(t, v)));
    series.sort_by_key(|p| p.t);
    if series.iter().map(|p| p.t).ne(grid.iter().copied()) {
        return Err(EvalError::invalid("hourly series is not on a uniform grid"));
    }
    let model = sarima_fit(&series, cfg.sarima).map_err(EvalError::invalid)?;
    let predicted: Vec<f64> = model.forecast(cfg.horizon).iter().map(|s| s.value).collect();
    let actual: Vec<f64> = points[split..].iter().map(|p| p.truth).collect();
    let forecast = ErrorMetrics {
        method: model.methodology(),
        points: actual.len(),
        mape: mape(&actual, &predicted).map_err(EvalError::invalid)?,
        mae: mae(&actual, &predicted).map_err(EvalError::invalid)?,
    };

    Ok(AlgorithmMetrics {
        dropped_nonsense: dropped.len(),
        detection,
        imputation,
        forecast,
    })
}
