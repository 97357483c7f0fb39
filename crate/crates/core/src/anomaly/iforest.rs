use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_contamination, check_rows, contamination_threshold, AnomalyError, FeatureRow, Result, Standardizer};
use crate::scalar::Scalar;

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Harmonic number `H(m)`: exact sum for `m <= 10`, `ln(m) + gamma` beyond.
pub fn harmonic<T: Scalar>(m: usize) -> T {
    if m <= 10 {
        (1..=m).map(|i| T::one() / T::from_usize_lossy(i)).sum()
    } else {
        T::from_usize_lossy(m).ln() + T::lit(EULER_MASCHERONI)
    }
}

/// Average path length of an unsuccessful binary search tree lookup among
/// `n` points: `c(n) = 2 H(n-1) - 2 (n-1) / n`, zero for `n < 2`.
pub fn average_path_length<T: Scalar>(n: usize) -> T {
    if n < 2 {
        return T::zero();
    }
    let two = T::lit(2.0);
    let m = T::from_usize_lossy(n - 1);
    two * harmonic::<T>(n - 1) - two * m / T::from_usize_lossy(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IForestParams {
    pub n_estimators: usize,
    pub subsample_size: usize,
    pub contamination: f64,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for IForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            subsample_size: 256,
            contamination: 0.035,
            seed: 0,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
enum Node<T> {
    Split {
        dim: usize,
        value: T,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct IsolationTree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> IsolationTree<T> {
    fn grow(rows: &[FeatureRow<T>], sample: Vec<usize>, height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        tree.build(rows, sample, 0, height_limit, rng);
        tree
    }

    fn build(
        &mut self,
        rows: &[FeatureRow<T>],
        idx: Vec<usize>,
        depth: usize,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= height_limit || idx.len() <= 1 {
            return me;
        }
        let arity = rows[idx[0]].len();
        let ranges: Vec<(usize, T, T)> = (0..arity)
            .filter_map(|d| {
                let (lo, hi) = idx.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| {
                    (lo.min(rows[i][d]), hi.max(rows[i][d]))
                });
                (hi > lo).then_some((d, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return me;
        }
        let (dim, lo, hi) = ranges[rng.gen_range(0..ranges.len())];
        let u = T::lit(rng.gen::<f64>());
        let mut value = lo + u * (hi - lo);
        if value <= lo {
            value = (lo + hi) / T::lit(2.0);
        }
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| rows[i][dim] < value);
        let left = self.build(rows, left_idx, depth + 1, height_limit, rng);
        let right = self.build(rows, right_idx, depth + 1, height_limit, rng);
        self.nodes[me] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        me
    }

    fn path_length(&self, row: &[T]) -> T {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    node = if row[*dim] < *value { *left } else { *right };
                    depth += 1;
                }
                Node::Leaf { size } => {
                    return T::from_usize_lossy(depth) + average_path_length::<T>(*size);
                }
            }
        }
    }
}

/// Trained isolation forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IForestModel<T> {
    pub params: IForestParams,
    pub arity: usize,
    /// Effective subsample size: `min(subsample_size, training rows)`.
    pub subsample: usize,
    pub threshold: T,
    scaler: Option<Standardizer<T>>,
    trees: Vec<IsolationTree<T>>,
}

/// Grows `n_estimators` trees on random subsamples (without replacement) and
/// sets the outlier threshold from the training scores.
pub fn iforest_train<T: Scalar>(rows: &[FeatureRow<T>], params: IForestParams) -> Result<IForestModel<T>> {
    let arity = check_rows(rows)?;
    check_contamination(params.contamination)?;
    if params.n_estimators == 0 {
        return Err(AnomalyError::Training("need at least one tree".into()));
    }
    if params.subsample_size < 2 || rows.len() < 2 {
        return Err(AnomalyError::Training(format!(
            "need at least 2 rows and a subsample of at least 2 (rows {}, subsample {})",
            rows.len(),
            params.subsample_size
        )));
    }
    let scaler = params.standardize.then(|| Standardizer::fit(rows));
    let scaled: Vec<FeatureRow<T>> = match &scaler {
        Some(s) => rows.iter().map(|r| s.apply(r)).collect(),
        None => rows.to_vec(),
    };
    let subsample = params.subsample_size.min(rows.len());
    let height_limit = (subsample as f64).log2().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let trees = (0..params.n_estimators)
        .map(|_| {
            let sample = index::sample(&mut rng, scaled.len(), subsample).into_vec();
            IsolationTree::grow(&scaled, sample, height_limit, &mut rng)
        })
        .collect();
    let mut model = IForestModel {
        params,
        arity,
        subsample,
        threshold: T::zero(),
        scaler,
        trees,
    };
    let scores: Vec<T> = scaled.iter().map(|r| model.score_prepared(r)).collect();
    model.threshold = contamination_threshold(&scores, model.params.contamination);
    Ok(model)
}

impl<T: Scalar> IForestModel<T> {
    fn score_prepared(&self, row: &[T]) -> T {
        let n = T::from_usize_lossy(self.trees.len());
        let mean_path = self.trees.iter().map(|t| t.path_length(row)).sum::<T>() / n;
        Self::score_from_path(mean_path, self.subsample)
    }

    /// `2^(-E(h) / c(psi))`.
    pub fn score_from_path(mean_path: T, subsample: usize) -> T {
        let c = average_path_length::<T>(subsample);
        T::lit(2.0).powf(-mean_path / c)
    }

    /// Anomaly score in `(0, 1)`; higher is more anomalous.
    pub fn score(&self, row: &[T]) -> Result<T> {
        if row.len() != self.arity {
            return Err(AnomalyError::Arity {
                expected: self.arity,
                got: row.len(),
            });
        }
        Ok(match &self.scaler {
            Some(s) => self.score_prepared(&s.apply(row)),
            None => self.score_prepared(row),
        })
    }

    pub fn is_outlier(&self, row: &[T]) -> Result<bool> {
        Ok(self.score(row)? >= self.threshold)
    }

    /// Recomputes the threshold for another contamination factor over the
    /// given training rows.
    pub fn with_contamination(mut self, rows: &[FeatureRow<T>], contamination: f64) -> Result<Self> {
        check_contamination(contamination)?;
        let scores = rows.iter().map(|r| self.score(r)).collect::<Result<Vec<_>>>()?;
        self.params.contamination = contamination;
        self.threshold = contamination_threshold(&scores, contamination);
        Ok(self)
    }

    pub fn methodology(&self) -> String {
        format!(
            "iforest(n_estimators={},psi={},contamination={})",
            self.params.n_estimators, self.subsample, self.params.contamination
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
