//! Quality dimension formulas and the metadata overhead metric.
//!
//! All functions are pure; [`timeliness_update`] consumes and returns an
//! explicit state value owned by the caller.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("observation at {got} precedes the previous one at {last}")]
    Ordering { last: Timestamp, got: Timestamp },
    #[error("no neighbor values to assess precision against")]
    InsufficientData,
}

pub type Result<T> = std::result::Result<T, MetricError>;

fn finite<T: Scalar>(name: &str, x: T) -> Result<T> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(MetricError::Domain(format!("{name} is not finite ({x})")))
    }
}

/// Absolute difference between an observed value and a trusted reference.
pub fn accuracy<T: Scalar>(observed: T, reference: T) -> Result<T> {
    Ok((finite("observed value", observed)? - finite("reference value", reference)?).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletenessInputs<T> {
    pub window_seconds: T,
    /// Expected inter-arrival time.
    pub rate_seconds: T,
    /// Missed measurements within the window.
    pub missed_count: usize,
}

/// `(window - n * rate) / window`, clamped at 0.
pub fn completeness<T: Scalar>(inputs: CompletenessInputs<T>) -> Result<T> {
    let window = finite("window", inputs.window_seconds)?;
    let rate = finite("rate", inputs.rate_seconds)?;
    if window <= T::zero() || rate <= T::zero() {
        return Err(MetricError::Domain(format!(
            "window ({window}) and rate ({rate}) must be positive"
        )));
    }
    let n = T::from_usize_lossy(inputs.missed_count);
    Ok(((window - n * rate) / window).max(T::zero()))
}

/// Exponentially weighted mean inter-arrival time of one stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelinessState<T> {
    /// Mean update time of the previous iteration, seconds.
    pub mean_timeliness: T,
    pub last_observed_at: Timestamp,
    /// Weight of the history in `[0, 1]`.
    pub alpha: T,
}

impl<T: Scalar> TimelinessState<T> {
    pub fn new(mean_timeliness: T, last_observed_at: Timestamp, alpha: T) -> Result<Self> {
        let s = Self {
            mean_timeliness,
            last_observed_at,
            alpha,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(MetricError::Domain(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.mean_timeliness >= T::zero()) || !self.mean_timeliness.is_finite() {
            return Err(MetricError::Domain(format!(
                "mean timeliness {} must be finite and non-negative",
                self.mean_timeliness
            )));
        }
        Ok(())
    }
}

/// `mean_i = alpha * mean_{i-1} + (1 - alpha) * raw`, with `raw` the seconds
/// elapsed since the previous observation.
pub fn timeliness_update<T: Scalar>(
    state: TimelinessState<T>,
    observed_at: Timestamp,
) -> Result<(TimelinessState<T>, T)> {
    state.validate()?;
    if observed_at < state.last_observed_at {
        return Err(MetricError::Ordering {
            last: state.last_observed_at,
            got: observed_at,
        });
    }
    let raw = T::lit(observed_at.secs_since(state.last_observed_at));
    let mean = state.alpha * state.mean_timeliness + (T::one() - state.alpha) * raw;
    let next = TimelinessState {
        mean_timeliness: mean,
        last_observed_at: observed_at,
        alpha: state.alpha,
    };
    Ok((next, mean))
}

/// Root-mean-square deviation of neighbor values around the assessed value.
pub fn precision<T: Scalar>(assessed: T, neighbors: &[T]) -> Result<T> {
    if neighbors.is_empty() {
        return Err(MetricError::InsufficientData);
    }
    let mu = finite("assessed value", assessed)?;
    let mut sum = T::zero();
    for &x in neighbors {
        let d = finite("neighbor value", x)? - mu;
        sum += d * d;
    }
    Ok((sum / T::from_usize_lossy(neighbors.len())).sqrt())
}

/// Relative size increase in percent: `(enriched - raw) / raw * 100`.
pub fn overhead_percent(enriched_bytes: usize, raw_bytes: usize) -> Result<f64> {
    if raw_bytes == 0 {
        return Err(MetricError::Domain("raw size is zero".into()));
    }
    if enriched_bytes < raw_bytes {
        return Err(MetricError::Domain(format!(
            "enriched size {enriched_bytes} smaller than raw size {raw_bytes}"
        )));
    }
    Ok((enriched_bytes - raw_bytes) as f64 / raw_bytes as f64 * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(secs: i64) -> Timestamp {
        Timestamp::from_millis(secs * 1000)
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(21.5, 21.0).unwrap(), 0.5);
        assert_eq!(accuracy(20.0, 20.0).unwrap(), 0.0);
        assert!((accuracy(18.2f64, 19.7).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(accuracy(18.2f64, 19.7).unwrap(), accuracy(19.7, 18.2).unwrap());
        assert!(accuracy(f64::NAN, 1.0).is_err());
        assert_eq!(accuracy(21.5f32, 21.0f32).unwrap(), 0.5f32);
    }

    #[test]
    fn completeness_examples() {
        let c = |n| {
            completeness(CompletenessInputs {
                window_seconds: 7200.0f64,
                rate_seconds: 120.0,
                missed_count: n,
            })
            .unwrap()
        };
        assert_eq!(c(0), 1.0);
        assert!((c(3) - 0.95).abs() < 1e-12);
        assert_eq!(c(70), 0.0);
        for bad in [(0.0, 120.0), (7200.0, 0.0), (-1.0, 1.0)] {
            assert!(completeness(CompletenessInputs {
                window_seconds: bad.0,
                rate_seconds: bad.1,
                missed_count: 0
            })
            .is_err());
        }
    }

    #[test]
    fn timeliness_examples() {
        let step = |alpha: f64, prev: f64, raw: i64| {
            let s = TimelinessState::new(prev, t(0), alpha).unwrap();
            timeliness_update(s, t(raw)).unwrap().1
        };
        assert_eq!(step(0.5, 120.0, 124), 122.0);
        assert_eq!(step(1.0, 120.0, 999), 120.0);
        assert_eq!(step(0.0, 120.0, 124), 124.0);

        let s = TimelinessState::new(120.0, t(100), 0.8).unwrap();
        assert!(matches!(
            timeliness_update(s, t(99)),
            Err(MetricError::Ordering { .. })
        ));
        let (next, _) = timeliness_update(s, t(220)).unwrap();
        assert_eq!(next.last_observed_at, t(220));
        assert!(TimelinessState::new(1.0, t(0), 1.5).is_err());
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision(3.0, &[2.0, 4.0]).unwrap(), 1.0);
        assert_eq!(precision(5.0, &[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!((precision(0.0, &[3.0, -3.0, 0.0]).unwrap() - 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(precision::<f64>(1.0, &[]), Err(MetricError::InsufficientData));
    }

    #[test]
    fn overhead_examples() {
        assert!((overhead_percent(1339, 1205).unwrap() - 11.120_331_950_207_47).abs() < 1e-9);
        assert!((overhead_percent(1342, 1205).unwrap() - 11.369_294_605_809_13).abs() < 1e-9);
        assert_eq!(overhead_percent(1205, 1205).unwrap(), 0.0);
        assert!(overhead_percent(10, 0).is_err());
        assert!(overhead_percent(10, 11).is_err());
    }

    proptest! {
        #[test]
        fn accuracy_is_a_metric(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let ab = accuracy(a, b).unwrap();
            prop_assert_eq!(ab, accuracy(b, a).unwrap());
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab == 0.0, a == b);
        }

        #[test]
        fn completeness_monotone_in_misses(window in 1.0f64..1e5, rate in 1.0f64..1e3, n in 0usize..200) {
            let c = |n| completeness(CompletenessInputs { window_seconds: window, rate_seconds: rate, missed_count: n }).unwrap();
            prop_assert_eq!(c(0), 1.0);
            prop_assert!(c(n + 1) <= c(n));
            prop_assert!((0.0..=1.0).contains(&c(n)));
        }

        #[test]
        fn timeliness_fixpoint(alpha in 0.0f64..=1.0, secs in 1i64..10_000) {
            let prev = secs as f64;
            let s = TimelinessState::new(prev, t(0), alpha).unwrap();
            let (_, mean) = timeliness_update(s, t(secs)).unwrap();
            prop_assert!((mean - prev).abs() <= 1e-9 * prev);
        }

        #[test]
        fn precision_permutation_and_scaling(
            v in -100.0f64..100.0,
            xs in prop::collection::vec(-100.0f64..100.0, 1..20),
            c in -10.0f64..10.0,
        ) {
            let p = precision(v, &xs).unwrap();
            let mut rev = xs.clone();
            rev.reverse();
            prop_assert!((precision(v, &rev).unwrap() - p).abs() <= 1e-9 * (1.0 + p));
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            let ps = precision(c * v, &scaled).unwrap();
            prop_assert!((ps - c.abs() * p).abs() <= 1e-9 * (1.0 + c.abs() * p));
        }
    }
}
