use serde::{Deserialize, Serialize};

use super::{check_contamination, check_rows, contamination_threshold, euclidean, AnomalyError, FeatureRow, Result, Standardizer};
use crate::scalar::Scalar;

/// Local reachability density used when all reachability distances are zero
/// (duplicated points).
pub const LRD_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofParams {
    pub k: usize,
    pub contamination: f64,
    pub standardize: bool,
}

impl LofParams {
    /// Neighbourhood used when scoring the training set itself.
    pub fn outlier_mode() -> Self {
        Self {
            k: 70,
            contamination: 0.035,
            standardize: false,
        }
    }

    /// Neighbourhood used when scoring unseen rows.
    pub fn novelty_mode() -> Self {
        Self {
            k: 20,
            ..Self::outlier_mode()
        }
    }
}

/// Neighbourhood of one point: its k-distance and every other point no
/// farther than that.
struct Neighbourhood<T> {
    k_distance: T,
    members: Vec<(usize, T)>,
}

fn neighbourhood<T: Scalar>(mut dists: Vec<(usize, T)>, k: usize) -> Neighbourhood<T> {
    dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let k_distance = dists[k - 1].1;
    let cut = dists.partition_point(|&(_, d)| d <= k_distance);
    dists.truncate(cut);
    Neighbourhood {
        k_distance,
        members: dists,
    }
}

fn lrd_from_reach<T: Scalar>(reach_sum: T, count: usize) -> T {
    let mean = reach_sum / T::from_usize_lossy(count);
    if mean > T::zero() {
        (T::one() / mean).min(T::lit(LRD_CAP))
    } else {
        T::lit(LRD_CAP)
    }
}

struct Fitted<T> {
    k_distance: Vec<T>,
    lrd: Vec<T>,
    scores: Vec<T>,
}

fn fit<T: Scalar>(rows: &[FeatureRow<T>], k: usize) -> Fitted<T> {
    let n = rows.len();
    let hoods: Vec<Neighbourhood<T>> = (0..n)
        .map(|i| {
            let dists = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, euclidean(&rows[i], &rows[j])))
                .collect();
            neighbourhood(dists, k)
        })
        .collect();
    let k_distance: Vec<T> = hoods.iter().map(|h| h.k_distance).collect();
    let lrd: Vec<T> = hoods
        .iter()
        .map(|h| {
            let reach: T = h.members.iter().map(|&(o, d)| d.max(k_distance[o])).sum();
            lrd_from_reach(reach, h.members.len())
        })
        .collect();
    let scores = hoods
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mean_lrd = h.members.iter().map(|&(o, _)| lrd[o]).sum::<T>()
                / T::from_usize_lossy(h.members.len());
            mean_lrd / lrd[i]
        })
        .collect();
    Fitted {
        k_distance,
        lrd,
        scores,
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(AnomalyError::Domain(format!(
            "k = {k} must satisfy 1 <= k < {n} (number of rows)"
        )));
    }
    Ok(())
}

/// Local outlier factor of every row with respect to the others.
pub fn lof_scores<T: Scalar>(rows: &[FeatureRow<T>], k: usize) -> Result<Vec<T>> {
    check_rows(rows)?;
    check_k(k, rows.len())?;
    Ok(fit(rows, k).scores)
}

/// Trained LOF model for scoring unseen rows against the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LofModel<T> {
    pub params: LofParams,
    pub arity: usize,
    pub threshold: T,
    rows: Vec<FeatureRow<T>>,
    k_distance: Vec<T>,
    lrd: Vec<T>,
    scaler: Option<Standardizer<T>>,
}

/// Stores the training rows with their k-distances and densities; the
/// threshold comes from the training rows' own LOF scores.
pub fn lof_train<T: Scalar>(rows: &[FeatureRow<T>], params: LofParams) -> Result<LofModel<T>> {
    let arity = check_rows(rows)?;
    check_k(params.k, rows.len())?;
    check_contamination(params.contamination)?;
    let scaler = params.standardize.then(|| Standardizer::fit(rows));
    let rows: Vec<FeatureRow<T>> = match &scaler {
        Some(s) => rows.iter().map(|r| s.apply(r)).collect(),
        None => rows.to_vec(),
    };
    let fitted = fit(&rows, params.k);
    Ok(LofModel {
        threshold: contamination_threshold(&fitted.scores, params.contamination),
        params,
        arity,
        rows,
        k_distance: fitted.k_distance,
        lrd: fitted.lrd,
        scaler,
    })
}

impl<T: Scalar> LofModel<T> {
    /// LOF of `row` computed against the training rows only; the row itself
    /// is not inserted.
    pub fn novelty_score(&self, row: &[T]) -> Result<T> {
        if row.len() != self.arity {
            return Err(AnomalyError::Arity {
                expected: self.arity,
                got: row.len(),
            });
        }
        let query = match &self.scaler {
            Some(s) => s.apply(row),
            None => row.to_vec(),
        };
        let dists = self
            .rows
            .iter()
            .enumerate()
            .map(|(j, r)| (j, euclidean(&query, r)))
            .collect();
        let hood = neighbourhood(dists, self.params.k);
        let reach: T = hood
            .members
            .iter()
            .map(|&(o, d)| d.max(self.k_distance[o]))
            .sum();
        let lrd = lrd_from_reach(reach, hood.members.len());
        let mean_lrd = hood.members.iter().map(|&(o, _)| self.lrd[o]).sum::<T>()
            / T::from_usize_lossy(hood.members.len());
        Ok(mean_lrd / lrd)
    }

    pub fn is_novelty(&self, row: &[T]) -> Result<bool> {
        Ok(self.novelty_score(row)? >= self.threshold)
    }

    pub fn training_len(&self) -> usize {
        self.rows.len()
    }

    pub fn methodology(&self) -> String {
        format!("lof(k={},contamination={})", self.params.k, self.params.contamination)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_interior_is_inlier() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let scores = lof_scores(&rows, 2).unwrap();
        for s in &scores[3..27] {
            assert!((s - 1.0).abs() < 0.05, "{s}");
        }
    }

    #[test]
    fn isolated_point_in_small_set() {
        let rows = vec![vec![0.9], vec![1.0], vec![1.1], vec![10.0]];
        let s = lof_scores(&rows, 2).unwrap();
        assert!(s[3] > 2.0, "{s:?}");
        assert!(s[..3].iter().all(|&x| x < 1.5), "{s:?}");
    }

    #[test]
    fn duplicates_give_finite_scores() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0], vec![5.0]];
        let s = lof_scores(&rows, 2).unwrap();
        assert!(s.iter().all(|x| x.is_finite()), "{s:?}");
    }

    #[test]
    fn k_must_be_below_row_count() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(lof_scores(&rows, 3).is_err());
        assert!(lof_scores(&rows, 0).is_err());
        assert!(lof_train(&rows, LofParams { k: 3, ..LofParams::novelty_mode() }).is_err());
    }

    #[test]
    fn novelty_arity_is_checked() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let m = lof_train(&rows, LofParams { k: 3, ..LofParams::novelty_mode() }).unwrap();
        assert!(matches!(m.novelty_score(&[1.0]), Err(AnomalyError::Arity { .. })));
        let back = LofModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
