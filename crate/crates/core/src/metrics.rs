//! Error metrics between actual values `y` and predictions `yhat`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_HUBER_DELTA: f64 = 1.0;

/// Threshold between the quadratic and linear parts of the Huber loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberParams {
    pub delta: f64,
}

impl Default for HuberParams {
    fn default() -> Self {
        Self {
            delta: DEFAULT_HUBER_DELTA,
        }
    }
}

impl HuberParams {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta.is_finite() {
            Ok(Self { delta })
        } else {
            Err(Error::invalid(format!("huber delta {delta} must be > 0")))
        }
    }
}

/// All six metrics for one set of predictions. `msle` and `r2` are `None` where undefined
/// (a value at or below -1 for MSLE, a constant target or a single sample for R²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub rmse: f64,
    pub mse: f64,
    pub huber: f64,
    pub mae: f64,
    pub msle: Option<f64>,
    pub r2: Option<f64>,
}

/// Test-minus-train difference per metric. Negative error diffs mean the test set scored better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffSet {
    pub rmse_diff: f64,
    pub mse_diff: f64,
    pub loss_diff: f64,
    pub mae_diff: f64,
    pub msle_diff: Option<f64>,
    pub r2s_diff: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rmse,
    Mse,
    Huber,
    Mae,
    Msle,
    R2,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Rmse,
        Metric::Mse,
        Metric::Huber,
        Metric::Mae,
        Metric::Msle,
        Metric::R2,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Mse => "mse",
            Metric::Huber => "huber",
            Metric::Mae => "mae",
            Metric::Msle => "msle",
            Metric::R2 => "r2",
        }
    }

    /// Column header in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Metric::Rmse => "RMSE",
            Metric::Mse => "MSE",
            Metric::Huber => "HUBER LOSS",
            Metric::Mae => "MAE",
            Metric::Msle => "MSLE",
            Metric::R2 => "R2",
        }
    }

    /// Lower is better for every metric except R².
    pub fn lower_is_better(self) -> bool {
        self != Metric::R2
    }

    pub fn of(self, m: &MetricSet) -> Option<f64> {
        match self {
            Metric::Rmse => Some(m.rmse),
            Metric::Mse => Some(m.mse),
            Metric::Huber => Some(m.huber),
            Metric::Mae => Some(m.mae),
            Metric::Msle => m.msle,
            Metric::R2 => m.r2,
        }
    }

    pub fn of_diff(self, d: &DiffSet) -> Option<f64> {
        match self {
            Metric::Rmse => Some(d.rmse_diff),
            Metric::Mse => Some(d.mse_diff),
            Metric::Huber => Some(d.loss_diff),
            Metric::Mae => Some(d.mae_diff),
            Metric::Msle => d.msle_diff,
            Metric::R2 => d.r2s_diff,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown metric '{s}'")))
    }
}

fn check<T: Scalar>(y: &[T], yhat: &[T]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::invalid(format!(
            "actual has {} values, predicted {}",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    if y.iter().chain(yhat).any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow("metric input".into()));
    }
    Ok(())
}

fn mean_of<T: Scalar>(y: &[T], yhat: &[T], f: impl Fn(T, T) -> T) -> T {
    let sum = y.iter().zip(yhat).fold(T::zero(), |acc, (&a, &p)| acc + f(a, p));
    sum / T::lit(y.len() as f64)
}

/// `(1/n) sum (y - yhat)^2`
pub fn mse<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check(y, yhat)?;
    Ok(mean_of(y, yhat, |a, p| (a - p) * (a - p)))
}

pub fn rmse<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    Ok(mse(y, yhat)?.sqrt())
}

/// `(1/n) sum |y - yhat|`
pub fn mae<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check(y, yhat)?;
    Ok(mean_of(y, yhat, |a, p| (a - p).abs()))
}

/// Per-sample Huber loss on the residual `r`.
pub fn huber_point<T: Scalar>(r: T, delta: T) -> T {
    let half = T::lit(0.5);
    if r.abs() <= delta {
        half * r * r
    } else {
        delta * (r.abs() - half * delta)
    }
}

/// Mean over samples of the Huber loss of `y - yhat`.
pub fn huber<T: Scalar>(y: &[T], yhat: &[T], p: HuberParams) -> Result<T> {
    check(y, yhat)?;
    let delta = T::lit(HuberParams::new(p.delta)?.delta);
    Ok(mean_of(y, yhat, |a, q| huber_point(a - q, delta)))
}

/// `(1/n) sum (ln(1 + y) - ln(1 + yhat))^2`; every value must exceed -1.
pub fn msle<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check(y, yhat)?;
    if let Some(bad) = y.iter().chain(yhat).find(|&&v| v <= -T::one()) {
        return Err(Error::Domain(format!("msle undefined for value {bad}")));
    }
    Ok(mean_of(y, yhat, |a, p| {
        let d = a.ln_1p() - p.ln_1p();
        d * d
    }))
}

/// `1 - sum (y - yhat)^2 / sum (y - mean(y))^2`
pub fn r2<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check(y, yhat)?;
    if y.len() < 2 {
        return Err(Error::Domain("r2 needs at least two samples".into()));
    }
    let n = T::lit(y.len() as f64);
    let mean = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let ss_tot = y.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
    if ss_tot == T::zero() {
        return Err(Error::Domain("r2 undefined for a constant target".into()));
    }
    let ss_res = y.iter().zip(yhat).fold(T::zero(), |a, (&v, &p)| a + (v - p) * (v - p));
    Ok(T::one() - ss_res / ss_tot)
}

/// Computes all six metrics; domain failures in MSLE or R² mark that metric undefined
/// instead of failing the set.
pub fn all_metrics<T: Scalar>(y: &[T], yhat: &[T], p: HuberParams) -> Result<MetricSet> {
    let mse_v = mse(y, yhat)?.as_f64();
    let soft = |r: Result<T>| match r {
        Ok(v) => Ok(Some(v.as_f64())),
        Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(MetricSet {
        rmse: mse_v.sqrt(),
        mse: mse_v,
        huber: huber(y, yhat, p)?.as_f64(),
        mae: mae(y, yhat)?.as_f64(),
        msle: soft(msle(y, yhat))?,
        r2: soft(r2(y, yhat))?,
    })
}

/// Componentwise `test - train`.
pub fn metric_diff(test: &MetricSet, train: &MetricSet) -> DiffSet {
    let opt = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
    DiffSet {
        rmse_diff: test.rmse - train.rmse,
        mse_diff: test.mse - train.mse,
        loss_diff: test.huber - train.huber,
        mae_diff: test.mae - train.mae,
        msle_diff: opt(test.msle, train.msle),
        r2s_diff: opt(test.r2, train.r2),
    }
}
