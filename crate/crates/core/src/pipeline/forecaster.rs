use serde::{Deserialize, Serialize};

use crate::forecast::{ForecastStep, SarimaModel};
use crate::time::Timestamp;

/// Expected value and forecast-error sigma at a point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub sigma: f64,
}

/// Short-term forecast laid out on a time grid; values between grid points
/// are linearly interpolated. Outside the grid nothing is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTable {
    steps: Vec<ForecastStep<f64>>,
    methodology: String,
}

impl ForecastTable {
    pub fn new(mut steps: Vec<ForecastStep<f64>>, methodology: impl Into<String>) -> Self {
        steps.sort_by_key(|s| s.t);
        Self {
            steps,
            methodology: methodology.into(),
        }
    }

    pub fn from_model(model: &SarimaModel<f64>, horizon: usize) -> Self {
        Self::new(model.forecast(horizon), model.methodology())
    }

    pub fn methodology(&self) -> &str {
        &self.methodology
    }

    pub fn steps(&self) -> &[ForecastStep<f64>] {
        &self.steps
    }

    pub fn covers(&self, t: Timestamp) -> bool {
        matches!((self.steps.first(), self.steps.last()), (Some(a), Some(b)) if a.t <= t && t <= b.t)
    }

    pub fn at(&self, t: Timestamp) -> Option<Expectation> {
        if !self.covers(t) {
            return None;
        }
        let i = self.steps.partition_point(|s| s.t < t);
        let hi = &self.steps[i];
        if hi.t == t || i == 0 {
            return Some(Expectation {
                value: hi.value,
                sigma: hi.sigma,
            });
        }
        let lo = &self.steps[i - 1];
        let f = (t.millis() - lo.t.millis()) as f64 / (hi.t.millis() - lo.t.millis()) as f64;
        Some(Expectation {
            value: lo.value + f * (hi.value - lo.value),
            sigma: lo.sigma + f * (hi.sigma - lo.sigma),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_inside_and_refuses_outside() {
        let step = |ms, value, sigma| ForecastStep {
            t: Timestamp::from_millis(ms),
            value,
            sigma,
        };
        let table = ForecastTable::new(vec![step(2000, 20.0, 2.0), step(0, 10.0, 1.0)], "m");
        assert_eq!(table.at(Timestamp::from_millis(0)).unwrap().value, 10.0);
        let mid = table.at(Timestamp::from_millis(500)).unwrap();
        assert_eq!((mid.value, mid.sigma), (12.5, 1.25));
        assert_eq!(table.at(Timestamp::from_millis(2000)).unwrap().value, 20.0);
        assert!(table.at(Timestamp::from_millis(-1)).is_none());
        assert!(table.at(Timestamp::from_millis(2001)).is_none());
    }
}
