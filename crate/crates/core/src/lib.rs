//! Streaming data-quality assessment and curation for IoT observation streams.
//!
//! The crate is organised around the curation flow applied to every incoming
//! observation: loss management, novelty detection, computation of the four
//! quality dimensions (accuracy, completeness, timeliness, precision) and
//! tagging of the observation with a linked `DataQualityAssessment` entity.
//!
//! The numerical building blocks (quality formulas, anomaly detectors,
//! imputers and the SARIMA forecaster) are generic over the floating point
//! type through [`Scalar`]; the `f64` instantiations used by the pipeline are
//! re-exported below as plain aliases.

pub mod anomaly;
pub mod entity;
pub mod forecast;
pub mod imputation;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod scalar;
pub mod store;
pub mod time;

pub use scalar::Scalar;
pub use time::Timestamp;

pub use entity::{
    DqAssessment, DqProperty, Entity, GeoPoint, Observation, OutlierTag, SyntheticTag,
};
pub use store::{ContextStore, DuplicatePolicy, TemporalQuery, TemporalRecord};

/// Isolation forest over `f64` feature rows.
pub type IForest = anomaly::IForestModel<f64>;
/// Isolation forest over `f32` feature rows.
pub type IForest32 = anomaly::IForestModel<f32>;
/// Local outlier factor model over `f64` feature rows.
pub type Lof = anomaly::LofModel<f64>;
/// Local outlier factor model over `f32` feature rows.
pub type Lof32 = anomaly::LofModel<f32>;
/// Fitted SARIMA model over `f64` series.
pub type Sarima = forecast::SarimaModel<f64>;
/// Fitted SARIMA model over `f32` series.
pub type Sarima32 = forecast::SarimaModel<f32>;
/// Time series point with an `f64` value.
pub type SeriesPoint = imputation::TimeSeriesPoint<f64>;
/// Timeliness state with `f64` seconds.
pub type Timeliness = metrics::TimelinessState<f64>;
