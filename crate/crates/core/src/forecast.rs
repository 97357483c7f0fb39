//! Seasonal ARIMA estimation and forecasting.
//!
//! The model is
//! `(1 - phi(B)) (1 - Phi(B^s)) (1 - B)^d (1 - B^s)^D y_t = (1 + theta(B)) (1 + Theta(B^s)) e_t`,
//! estimated by conditional sum of squares over the differenced series with
//! a Nelder–Mead simplex. Non-stationary or non-invertible coefficient sets
//! are penalised rather than excluded, so the optimiser stays unconstrained.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::imputation::TimeSeriesPoint;
use crate::scalar::Scalar;
use crate::time::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum ForecastError {
    #[error("series too short: need {need} points, have {have}")]
    TooShort { need: usize, have: usize },
    #[error("series is not uniformly spaced (resample first)")]
    NonUniform,
    #[error("invalid input: {0}")]
    Input(String),
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ForecastError> = std::result::Result<T, E>;

/// Orders `(p, d, q)(P, D, Q)[s]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SarimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub sp: usize,
    #[serde(rename = "D")]
    pub sd: usize,
    #[serde(rename = "Q")]
    pub sq: usize,
    pub s: usize,
}

impl SarimaSpec {
    pub const fn new(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize, s: usize) -> Self {
        Self { p, d, q, sp, sd, sq, s }
    }

    /// `(0,1,1)(2,1,0)[24]`, the configuration used for hourly temperature.
    pub const fn hourly_default() -> Self {
        Self::new(0, 1, 1, 2, 1, 0, 24)
    }

    pub fn param_count(&self) -> usize {
        self.p + self.q + self.sp + self.sq
    }

    /// Minimum series length for a fit.
    pub fn min_length(&self) -> usize {
        self.s * (self.sd + 2) + self.d + self.p.max(self.q) + self.s * self.sp.max(self.sq)
    }

    fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(ForecastError::Input("seasonal period must be at least 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for SarimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SARIMA({},{},{})({},{},{})[{}]",
            self.p, self.d, self.q, self.sp, self.sd, self.sq, self.s
        )
    }
}

/// Applies `d` regular and `sd` seasonal differences.
pub fn difference<T: Scalar>(x: &[T], d: usize, sd: usize, s: usize) -> Vec<T> {
    let mut out = x.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    for _ in 0..sd {
        if out.len() <= s {
            return Vec::new();
        }
        out = (s..out.len()).map(|i| out[i] - out[i - s]).collect();
    }
    out
}

/// Inverts [`difference`] given the original series' leading values.
///
/// `head` must hold the first `d + sd * s` values of the original series.
pub fn integrate<T: Scalar>(diffed: &[T], head: &[T], d: usize, sd: usize, s: usize) -> Vec<T> {
    // Rebuild through the full differencing operator: y_t = w_t - sum_{i>=1} g_i y_{t-i}.
    let g = poly_mul(&regular_diff_poly(d), &seasonal_diff_poly(sd, s));
    let mut y = head.to_vec();
    for &w in diffed {
        let t = y.len();
        let mut v = w;
        for (i, &gi) in g.iter().enumerate().skip(1) {
            v -= T::lit(gi) * y[t - i];
        }
        y.push(v);
    }
    y
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn regular_diff_poly(d: usize) -> Vec<f64> {
    (0..d).fold(vec![1.0], |acc, _| poly_mul(&acc, &[1.0, -1.0]))
}

fn seasonal_diff_poly(sd: usize, s: usize) -> Vec<f64> {
    let mut base = vec![0.0; s + 1];
    base[0] = 1.0;
    base[s] = -1.0;
    (0..sd).fold(vec![1.0], |acc, _| poly_mul(&acc, &base))
}

fn poly_mul_t<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `1 + sign * sum c_i B^(i * stride)` as a coefficient vector.
fn lag_poly<T: Scalar>(coeffs: &[T], stride: usize, sign: T) -> Vec<T> {
    let mut out = vec![T::zero(); coeffs.len() * stride + 1];
    out[0] = T::one();
    for (i, &c) in coeffs.iter().enumerate() {
        out[(i + 1) * stride] = sign * c;
    }
    out
}

/// True when every root of `1 - sum a_i z^i` lies outside the unit circle
/// (step-down recursion on the reflection coefficients).
pub fn is_stationary<T: Scalar>(ar: &[T]) -> bool {
    let mut a: Vec<T> = ar.to_vec();
    while let Some(&last) = a.last() {
        if last.is_zero() {
            a.pop();
        } else {
            break;
        }
    }
    while !a.is_empty() {
        let k = a.len();
        let r = a[k - 1];
        if !(r.abs() < T::one()) {
            return false;
        }
        let den = T::one() - r * r;
        let next: Vec<T> = (0..k - 1).map(|j| (a[j] + r * a[k - 2 - j]) / den).collect();
        a = next;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct Coefficients<T> {
    ar: Vec<T>,
    ma: Vec<T>,
    sar: Vec<T>,
    sma: Vec<T>,
}

impl<T: Scalar> Coefficients<T> {
    fn unpack(spec: &SarimaSpec, x: &[T]) -> Self {
        let (ar, rest) = x.split_at(spec.p);
        let (ma, rest) = rest.split_at(spec.q);
        let (sar, sma) = rest.split_at(spec.sp);
        Self {
            ar: ar.to_vec(),
            ma: ma.to_vec(),
            sar: sar.to_vec(),
            sma: sma.to_vec(),
        }
    }

    fn admissible(&self) -> bool {
        let neg = |v: &[T]| v.iter().map(|&c| -c).collect::<Vec<_>>();
        is_stationary(&self.ar)
            && is_stationary(&self.sar)
            && is_stationary(&neg(&self.ma))
            && is_stationary(&neg(&self.sma))
    }

    /// Expanded AR polynomial `(1 - phi(B))(1 - Phi(B^s))`.
    fn ar_poly(&self, s: usize) -> Vec<T> {
        let m = -T::one();
        poly_mul_t(&lag_poly(&self.ar, 1, m), &lag_poly(&self.sar, s, m))
    }

    /// Expanded MA polynomial `(1 + theta(B))(1 + Theta(B^s))`.
    fn ma_poly(&self, s: usize) -> Vec<T> {
        poly_mul_t(&lag_poly(&self.ma, 1, T::one()), &lag_poly(&self.sma, s, T::one()))
    }
}

/// Conditional residuals of the differenced series. The first
/// `ar.len() - 1` entries are fixed at zero.
fn residuals<T: Scalar>(w: &[T], ar: &[T], ma: &[T]) -> Vec<T> {
    let start = ar.len() - 1;
    let mut e = vec![T::zero(); w.len()];
    for t in start..w.len() {
        let mut v = w[t];
        for i in 1..ar.len() {
            v += ar[i] * w[t - i];
        }
        for j in 1..ma.len() {
            if t >= start + j {
                v -= ma[j] * e[t - j];
            }
        }
        e[t] = v;
    }
    e
}

fn css<T: Scalar>(w: &[T], ar: &[T], ma: &[T]) -> T {
    residuals(w, ar, ma)[ar.len() - 1..]
        .iter()
        .map(|&e| e * e)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitLog<T> {
    pub iterations: usize,
    pub converged: bool,
    pub initial_css: T,
    pub final_css: T,
}

pub const MAX_ITERATIONS: usize = 500;
pub const CSS_TOLERANCE: f64 = 1e-8;

struct Simplex<T> {
    iterations: usize,
    converged: bool,
    best: Vec<T>,
    best_value: T,
}

/// Nelder–Mead minimisation from `x0` with an axis-aligned initial simplex.
fn nelder_mead<T: Scalar>(f: impl Fn(&[T]) -> T, x0: Vec<T>, step: T) -> Simplex<T> {
    let n = x0.len();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut pts: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    pts.push((x0.clone(), f(&x0)));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += step;
        let v = f(&x);
        pts.push((x, v));
    }
    let by_value = |a: &(Vec<T>, T), b: &(Vec<T>, T)| {
        a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        pts.sort_by(by_value);
        let (best, worst) = (pts[0].1, pts[n].1);
        if worst - best <= T::lit(CSS_TOLERANCE) * (best.abs() + T::min_positive_value()) {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<T> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p.0[j]).sum::<T>() / T::from_usize_lossy(n))
            .collect();
        let along = |coef: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&pts[n].0)
                .map(|(&c, &w)| c + coef * (c - w))
                .collect()
        };
        let reflected = along(T::one());
        let fr = f(&reflected);
        if fr < pts[0].1 {
            let expanded = along(two);
            let fe = f(&expanded);
            pts[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < pts[n - 1].1 {
            pts[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < pts[n].1 {
                let c = along(half);
                let v = f(&c);
                (c, v)
            } else {
                let c = along(-half);
                let v = f(&c);
                (c, v)
            };
            if fc < fr.min(pts[n].1) {
                pts[n] = (contracted, fc);
            } else {
                let best = pts[0].0.clone();
                for p in pts.iter_mut().skip(1) {
                    p.0 = best.iter().zip(&p.0).map(|(&b, &x)| b + half * (x - b)).collect();
                    p.1 = f(&p.0);
                }
            }
        }
    }
    pts.sort_by(by_value);
    let (best, best_value) = pts.swap_remove(0);
    Simplex {
        iterations,
        converged,
        best,
        best_value,
    }
}

/// One forecast step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ForecastStep<T> {
    pub t: Timestamp,
    pub value: T,
    /// Standard deviation of the forecast error at this horizon.
    pub sigma: T,
}

/// A fitted SARIMA model with the tail state needed to forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SarimaModel<T> {
    pub spec: SarimaSpec,
    coefficients: Coefficients<T>,
    pub sigma2: T,
    /// Trailing original-scale values, oldest first.
    history_tail: Vec<T>,
    /// Trailing residuals aligned with `history_tail`'s end, oldest first.
    residual_tail: Vec<T>,
    pub last_t: Timestamp,
    pub step_ms: i64,
    pub log: FitLog<T>,
}

fn uniform_step<T>(series: &[TimeSeriesPoint<T>]) -> Result<i64> {
    let step = series[1].t.millis() - series[0].t.millis();
    if step <= 0 || series.windows(2).any(|w| w[1].t.millis() - w[0].t.millis() != step) {
        return Err(ForecastError::NonUniform);
    }
    Ok(step)
}

/// Fits the coefficients by conditional sum of squares, starting from zero.
pub fn sarima_fit<T: Scalar>(series: &[TimeSeriesPoint<T>], spec: SarimaSpec) -> Result<SarimaModel<T>> {
    spec.validate()?;
    let need = spec.min_length().max(2);
    if series.len() < need {
        return Err(ForecastError::TooShort {
            need,
            have: series.len(),
        });
    }
    if series.iter().any(|p| !p.v.is_finite()) {
        return Err(ForecastError::Input("non-finite value in series".into()));
    }
    let step_ms = uniform_step(series)?;
    let y: Vec<T> = series.iter().map(|p| p.v).collect();
    let w = difference(&y, spec.d, spec.sd, spec.s);

    let objective_parts = |x: &[T]| {
        let c = Coefficients::unpack(&spec, x);
        let ar = c.ar_poly(spec.s);
        let ma = c.ma_poly(spec.s);
        (c, ar, ma)
    };
    let x0 = vec![T::zero(); spec.param_count()];
    let (_, ar0, ma0) = objective_parts(&x0);
    let initial_css = css(&w, &ar0, &ma0);
    let penalty = T::lit(1e10) * (T::one() + initial_css);
    let objective = |x: &[T]| {
        let (c, ar, ma) = objective_parts(x);
        if !c.admissible() {
            return penalty;
        }
        let v = css(&w, &ar, &ma);
        if v.is_finite() {
            v
        } else {
            penalty
        }
    };
    let simplex = if spec.param_count() == 0 {
        Simplex {
            iterations: 0,
            converged: true,
            best: Vec::new(),
            best_value: initial_css,
        }
    } else {
        nelder_mead(objective, x0, T::lit(0.1))
    };

    let coefficients = Coefficients::unpack(&spec, &simplex.best);
    let ar = coefficients.ar_poly(spec.s);
    let ma = coefficients.ma_poly(spec.s);
    let e_w = residuals(&w, &ar, &ma);
    let used = w.len() - (ar.len() - 1);
    let sigma2 = simplex.best_value / T::from_usize_lossy(used.max(1));

    // Both tails end at the last observation; residuals for the points
    // consumed by differencing are zero.
    let full_ar = full_ar_poly(&coefficients, &spec);
    let hist = (full_ar.len() - 1).max(ma.len() - 1).min(y.len());
    let res = (ma.len() - 1).min(e_w.len());
    Ok(SarimaModel {
        spec,
        sigma2,
        history_tail: y[y.len() - hist..].to_vec(),
        residual_tail: e_w[e_w.len() - res..].to_vec(),
        last_t: series[series.len() - 1].t,
        step_ms,
        log: FitLog {
            iterations: simplex.iterations,
            converged: simplex.converged,
            initial_css,
            final_css: simplex.best_value,
        },
        coefficients,
    })
}

/// AR polynomial including the differencing operators.
fn full_ar_poly<T: Scalar>(c: &Coefficients<T>, spec: &SarimaSpec) -> Vec<T> {
    let diff: Vec<T> = poly_mul(&regular_diff_poly(spec.d), &seasonal_diff_poly(spec.sd, spec.s))
        .into_iter()
        .map(T::lit)
        .collect();
    poly_mul_t(&c.ar_poly(spec.s), &diff)
}

impl<T: Scalar> SarimaModel<T> {
    pub fn ar(&self) -> &[T] {
        &self.coefficients.ar
    }

    pub fn ma(&self) -> &[T] {
        &self.coefficients.ma
    }

    pub fn seasonal_ar(&self) -> &[T] {
        &self.coefficients.sar
    }

    pub fn seasonal_ma(&self) -> &[T] {
        &self.coefficients.sma
    }

    pub fn residual_sigma(&self) -> T {
        self.sigma2.sqrt()
    }

    /// Recursive point forecasts for `horizon` steps after the last training
    /// point, with the MA(inf) error standard deviation at each step.
    pub fn forecast(&self, horizon: usize) -> Vec<ForecastStep<T>> {
        let g = full_ar_poly(&self.coefficients, &self.spec);
        let ma = self.coefficients.ma_poly(self.spec.s);

        let mut y = self.history_tail.clone();
        let base = y.len();
        // Past residuals, zero-padded on the left to line up with `y`.
        let mut e = vec![T::zero(); base.saturating_sub(self.residual_tail.len())];
        e.extend_from_slice(&self.residual_tail[self.residual_tail.len().saturating_sub(base)..]);

        // psi weights of the MA(inf) representation.
        let mut psi = vec![T::one()];
        for j in 1..horizon {
            let mut v = ma.get(j).copied().unwrap_or_else(T::zero);
            for i in 1..=j.min(g.len() - 1) {
                v -= g[i] * psi[j - i];
            }
            psi.push(v);
        }

        let mut out = Vec::with_capacity(horizon);
        let mut var_acc = T::zero();
        for h in 0..horizon {
            let t = y.len();
            let mut v = T::zero();
            for i in 1..g.len() {
                if t >= i {
                    v -= g[i] * y[t - i];
                }
            }
            for j in 1..ma.len() {
                if t >= j && t - j < e.len() {
                    v += ma[j] * e[t - j];
                }
            }
            y.push(v);
            e.push(T::zero());
            var_acc += psi[h] * psi[h];
            out.push(ForecastStep {
                t: self.last_t.plus_millis(self.step_ms * (h as i64 + 1)),
                value: v,
                sigma: (self.sigma2 * var_acc).sqrt(),
            });
        }
        out
    }

    pub fn methodology(&self) -> String {
        self.spec.to_string()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Series point tagged as observed or forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExtendedPoint<T> {
    pub t: Timestamp,
    pub v: T,
    pub synthetic: bool,
    pub methodology: Option<String>,
}

/// Appends `horizon` forecast points to a clean series, each marked
/// synthetic with the model configuration as methodology.
pub fn extend_dataset<T: Scalar>(
    series: &[TimeSeriesPoint<T>],
    spec: SarimaSpec,
    horizon: usize,
) -> Result<(Vec<ExtendedPoint<T>>, SarimaModel<T>)> {
    let model = sarima_fit(series, spec)?;
    let methodology = model.methodology();
    let mut out: Vec<ExtendedPoint<T>> = series
        .iter()
        .map(|p| ExtendedPoint {
            t: p.t,
            v: p.v,
            synthetic: false,
            methodology: None,
        })
        .collect();
    out.extend(model.forecast(horizon).into_iter().map(|f| ExtendedPoint {
        t: f.t,
        v: f.value,
        synthetic: true,
        methodology: Some(methodology.clone()),
    }));
    Ok((out, model))
}
