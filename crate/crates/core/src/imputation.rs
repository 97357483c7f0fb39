//! Gap filling for time series: local polynomial interpolation and k-nearest
//! neighbours over time, plus the MAPE / MAE error metrics.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TimeSeriesPoint<T> {
    pub t: Timestamp,
    pub v: T,
}

impl<T> TimeSeriesPoint<T> {
    pub fn new(t: Timestamp, v: T) -> Self {
        Self { t, v }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImputeError {
    #[error("no known points")]
    Empty,
    #[error("need at least {need} known points, have {have}")]
    NotEnough { need: usize, have: usize },
    #[error("known points are not sorted by time")]
    Unsorted,
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, ImputeError>;

fn check_sorted<T>(known: &[TimeSeriesPoint<T>]) -> Result<()> {
    if known.windows(2).all(|w| w[0].t <= w[1].t) {
        Ok(())
    } else {
        Err(ImputeError::Unsorted)
    }
}

/// Indices of the `count` known points nearest to `at` by `|dt|`, ties
/// resolved toward the earlier point.
fn nearest<T>(known: &[TimeSeriesPoint<T>], at: Timestamp, count: usize) -> Vec<usize> {
    let mut right = known.partition_point(|p| p.t < at);
    let mut left = right; // exclusive: candidates are known[..left]
    let mut out = Vec::with_capacity(count);
    while out.len() < count && (left > 0 || right < known.len()) {
        let dl = (left > 0).then(|| at.millis() - known[left - 1].t.millis());
        let dr = (right < known.len()).then(|| known[right].t.millis() - at.millis());
        match (dl, dr) {
            (Some(l), Some(r)) if l <= r => {
                left -= 1;
                out.push(left);
            }
            (Some(_), None) => {
                left -= 1;
                out.push(left);
            }
            _ => {
                out.push(right);
                right += 1;
            }
        }
    }
    out
}

/// Solves the least-squares polynomial fit `sum c_j x^j` via the normal
/// equations; returns the coefficients.
fn poly_fit<T: Scalar>(xs: &[T], ys: &[T], degree: usize) -> Option<Vec<T>> {
    let m = degree + 1;
    let mut a = vec![vec![T::zero(); m + 1]; m];
    for (&x, &y) in xs.iter().zip(ys) {
        let mut powers = vec![T::one(); 2 * m - 1];
        for j in 1..powers.len() {
            powers[j] = powers[j - 1] * x;
        }
        for r in 0..m {
            for c in 0..m {
                a[r][c] += powers[r + c];
            }
            a[r][m] += powers[r] * y;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() <= T::epsilon() {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    let v = a[col][c];
                    a[r][c] -= f * v;
                }
            }
        }
    }
    Some((0..m).map(|r| a[r][m] / a[r][r]).collect())
}

/// Fits a least-squares polynomial of `degree` to the `window` known points
/// nearest each gap timestamp and evaluates it there.
///
/// Where a window holds fewer than `degree + 1` distinct timestamps the
/// largest feasible degree is used instead.
pub fn interpolate_poly<T: Scalar>(
    known: &[TimeSeriesPoint<T>],
    gaps: &[Timestamp],
    degree: usize,
    window: usize,
) -> Result<Vec<T>> {
    if known.is_empty() {
        return Err(ImputeError::Empty);
    }
    check_sorted(known)?;
    if window == 0 {
        return Err(ImputeError::Domain("window must be at least 1".into()));
    }
    gaps.iter()
        .map(|&at| {
            let idx = nearest(known, at, window);
            let scale = idx
                .iter()
                .map(|&i| (known[i].t.millis() - at.millis()).abs())
                .max()
                .filter(|&s| s > 0)
                .unwrap_or(1) as f64;
            let xs: Vec<T> = idx
                .iter()
                .map(|&i| T::lit((known[i].t.millis() - at.millis()) as f64 / scale))
                .collect();
            let ys: Vec<T> = idx.iter().map(|&i| known[i].v).collect();
            let mut distinct: Vec<i64> = idx.iter().map(|&i| known[i].t.millis()).collect();
            distinct.sort_unstable();
            distinct.dedup();
            let mut deg = degree.min(distinct.len() - 1);
            loop {
                // The fit is centred on the gap, so the constant term is the estimate.
                if let Some(c) = poly_fit(&xs, &ys, deg) {
                    return Ok(c[0]);
                }
                if deg == 0 {
                    return Err(ImputeError::Domain("singular fit".into()));
                }
                deg -= 1;
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KnnWeighting {
    #[default]
    Uniform,
    InverseDistance,
}

/// Mean of the `k` known values nearest in time to each gap.
pub fn impute_knn<T: Scalar>(
    known: &[TimeSeriesPoint<T>],
    gaps: &[Timestamp],
    k: usize,
    weighting: KnnWeighting,
) -> Result<Vec<T>> {
    if k == 0 {
        return Err(ImputeError::Domain("k must be at least 1".into()));
    }
    if known.len() < k {
        return Err(ImputeError::NotEnough {
            need: k,
            have: known.len(),
        });
    }
    check_sorted(known)?;
    Ok(gaps
        .iter()
        .map(|&at| {
            let idx = nearest(known, at, k);
            match weighting {
                KnnWeighting::Uniform => {
                    idx.iter().map(|&i| known[i].v).sum::<T>() / T::from_usize_lossy(idx.len())
                }
                KnnWeighting::InverseDistance => {
                    if let Some(&i) = idx.iter().find(|&&i| known[i].t == at) {
                        return known[i].v;
                    }
                    let (mut num, mut den) = (T::zero(), T::zero());
                    for &i in &idx {
                        let w = T::one() / T::lit(known[i].t.secs_since(at).abs());
                        num += w * known[i].v;
                        den += w;
                    }
                    num / den
                }
            }
        })
        .collect())
}

fn check_pair<T>(actual: &[T], predicted: &[T]) -> Result<()> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(ImputeError::Domain(format!(
            "need equal non-zero lengths (actual {}, predicted {})",
            actual.len(),
            predicted.len()
        )));
    }
    Ok(())
}

/// Mean absolute percentage error as a fraction.
pub fn mape<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check_pair(actual, predicted)?;
    if actual.iter().any(|a| a.is_zero()) {
        return Err(ImputeError::Domain("MAPE undefined for zero actual values".into()));
    }
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(&a, &p)| ((a - p) / a).abs())
        .sum::<T>()
        / T::from_usize_lossy(actual.len()))
}

/// Mean absolute error.
pub fn mae<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check_pair(actual, predicted)?;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(&a, &p)| (a - p).abs())
        .sum::<T>()
        / T::from_usize_lossy(actual.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(data: &[(i64, f64)]) -> Vec<TimeSeriesPoint<f64>> {
        data.iter()
            .map(|&(t, v)| TimeSeriesPoint::new(Timestamp::from_millis(t * 1000), v))
            .collect()
    }

    fn at(t: i64) -> Timestamp {
        Timestamp::from_millis(t * 1000)
    }

    #[test]
    fn quadratic_is_reproduced() {
        let known = pts(&[(0, 0.0), (1, 1.0), (2, 4.0), (4, 16.0)]);
        let got = interpolate_poly(&known, &[at(3)], 2, 6).unwrap();
        assert!((got[0] - 9.0).abs() < 1e-9, "{got:?}");
    }

    #[test]
    fn lines_are_reproduced() {
        let known = pts(&[(0, 0.0), (1, 2.0), (2, 4.0), (5, 10.0), (6, 12.0), (9, 18.0)]);
        let got = interpolate_poly(&known, &[at(3), at(4), at(7), at(12)], 2, 6).unwrap();
        for (g, want) in got.iter().zip([6.0, 8.0, 14.0, 24.0]) {
            assert!((g - want).abs() < 1e-9, "{g} vs {want}");
        }
    }

    #[test]
    fn degree_falls_back_when_window_is_small() {
        let known = pts(&[(0, 1.0), (2, 3.0)]);
        let got = interpolate_poly(&known, &[at(1)], 2, 6).unwrap();
        assert!((got[0] - 2.0).abs() < 1e-12);
        let single = pts(&[(0, 5.0)]);
        assert_eq!(interpolate_poly(&single, &[at(3)], 2, 6).unwrap(), vec![5.0]);
        assert_eq!(interpolate_poly::<f64>(&[], &[at(3)], 2, 6), Err(ImputeError::Empty));
    }

    #[test]
    fn unsorted_input_rejected() {
        let known = pts(&[(1, 0.0), (0, 1.0)]);
        assert_eq!(interpolate_poly(&known, &[at(3)], 2, 6), Err(ImputeError::Unsorted));
    }

    #[test]
    fn knn_examples() {
        let constant = pts(&[(0, 7.0), (1, 7.0), (2, 7.0), (4, 7.0), (5, 7.0), (6, 7.0)]);
        assert_eq!(impute_knn(&constant, &[at(3)], 5, KnnWeighting::Uniform).unwrap(), vec![7.0]);

        let known = pts(&[(0, 1.0), (1, 2.0), (2, 3.0), (4, 5.0), (5, 6.0), (9, 10.0)]);
        assert_eq!(impute_knn(&known, &[at(3)], 1, KnnWeighting::Uniform).unwrap(), vec![3.0]);
        // Nearest five to t=3: 2,4 (d=1), 1,5 (d=2), 0 (d=3).
        let got = impute_knn(&known, &[at(3)], 5, KnnWeighting::Uniform).unwrap();
        assert!((got[0] - (3.0 + 5.0 + 2.0 + 6.0 + 1.0) / 5.0).abs() < 1e-12);
        assert_eq!(
            impute_knn(&known, &[at(3)], 7, KnnWeighting::Uniform),
            Err(ImputeError::NotEnough { need: 7, have: 6 })
        );
    }

    #[test]
    fn knn_inverse_distance() {
        let known = pts(&[(0, 0.0), (1, 10.0), (4, 40.0)]);
        let got = impute_knn(&known, &[at(2), at(1)], 2, KnnWeighting::InverseDistance).unwrap();
        // Neighbours of t=2: t=1 (w=1) and t=0 (w=1/2); ties go earlier.
        assert!((got[0] - (10.0 + 0.0 * 0.5) / 1.5).abs() < 1e-12);
        assert_eq!(got[1], 10.0);
    }

    #[test]
    fn knn_matches_brute_force() {
        let known: Vec<TimeSeriesPoint<f64>> = (0..60)
            .filter(|i| i % 7 != 3)
            .map(|i| TimeSeriesPoint::new(at(i * 3), (i as f64 * 0.7).sin() * 10.0 + i as f64))
            .collect();
        for gap in [0, 8, 10, 62, 100, 200] {
            let mut by_dist: Vec<(i64, i64, f64)> = known
                .iter()
                .map(|p| ((p.t.millis() - at(gap).millis()).abs(), p.t.millis(), p.v))
                .collect();
            by_dist.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            let oracle: f64 = by_dist[..5].iter().map(|x| x.2).sum::<f64>() / 5.0;
            let got = impute_knn(&known, &[at(gap)], 5, KnnWeighting::Uniform).unwrap()[0];
            assert!((got - oracle).abs() < 1e-12, "gap {gap}: {got} vs {oracle}");
        }
    }

    #[test]
    fn error_metrics() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mape(&[10.0f64], &[9.0]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mae(&[10.0], &[9.0]).unwrap(), 1.0);
        assert!(mape(&[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert_eq!(mae(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!(mae::<f64>(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn imputers_ignore_far_points(shift in -100.0f64..100.0, gap in 20i64..40) {
            let mut known = pts(&(0..60).filter(|&i| i != gap).map(|i| (i, (i as f64 * 0.2).cos())).collect::<Vec<_>>());
            let base_poly = interpolate_poly(&known, &[at(gap)], 2, 6).unwrap();
            let base_knn = impute_knn(&known, &[at(gap)], 5, KnnWeighting::Uniform).unwrap();
            known[0].v += shift;
            let last = known.len() - 1;
            known[last].v -= shift;
            prop_assert_eq!(interpolate_poly(&known, &[at(gap)], 2, 6).unwrap(), base_poly);
            prop_assert_eq!(impute_knn(&known, &[at(gap)], 5, KnnWeighting::Uniform).unwrap(), base_knn);
        }

        #[test]
        fn quadratics_are_exact(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, gap in 2i64..18) {
            let f = |t: f64| a + b * t + c * t * t;
            let known = pts(&(0..20).filter(|&i| i != gap).map(|i| (i, f(i as f64))).collect::<Vec<_>>());
            let got = interpolate_poly(&known, &[at(gap)], 2, 6).unwrap()[0];
            prop_assert!((got - f(gap as f64)).abs() < 1e-6 * (1.0 + f(gap as f64).abs()));
        }
    }
}
