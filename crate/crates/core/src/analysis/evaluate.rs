use serde::{Deserialize, Serialize};

use crate::data::{PartitionWindows, Scaler, WindowSet};
use crate::error::{Error, Result};
use crate::metrics::{all_metrics, metric_diff, DiffSet, HuberParams, Metric, MetricSet};
use crate::models::{Model, ModelKind};
use crate::regularization::RegimeId;
use crate::scalar::Scalar;
use crate::training::TrainingHistory;

pub const DEFAULT_TAU: f64 = 0.10;
pub const DEFAULT_GAP_EPSILON: f64 = 1e-9;
pub const DEFAULT_DIVERGENCE_RUN: usize = 3;

/// Anything that maps windows to one prediction each, in the windows' units.
pub trait Predictor<T: Scalar> {
    fn predict_windows(&self, set: &WindowSet<T>) -> Result<Vec<T>>;
}

impl<T: Scalar> Predictor<T> for Model<T> {
    fn predict_windows(&self, set: &WindowSet<T>) -> Result<Vec<T>> {
        self.predict(&set.inputs, 512)
    }
}

/// Train and test metrics in original target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train: MetricSet,
    pub test: MetricSet,
    pub diff: DiffSet,
}

fn unscaled_metrics<T: Scalar, P: Predictor<T>>(
    model: &P,
    set: &WindowSet<T>,
    scaler: &Scaler,
    huber: HuberParams,
    name: &str,
) -> Result<MetricSet> {
    if set.is_empty() {
        return Err(Error::invalid(format!("{name} partition has no windows")));
    }
    let pred = model.predict_windows(set)?;
    let yhat: Vec<f64> = pred.iter().map(|p| scaler.inverse_target(p.as_f64())).collect();
    let y: Vec<f64> = set.targets.iter().map(|t| scaler.inverse_target(t.as_f64())).collect();
    all_metrics(&y, &yhat, huber)
}

/// Eval-mode predictions on the train and test windows, mapped back to original units.
pub fn evaluate<T: Scalar, P: Predictor<T>>(
    model: &P,
    windows: &PartitionWindows<T>,
    scaler: &Scaler,
    huber: HuberParams,
) -> Result<Evaluation> {
    let train = unscaled_metrics(model, &windows.train, scaler, huber, "train")?;
    let test = unscaled_metrics(model, &windows.test, scaler, huber, "test")?;
    Ok(Evaluation {
        diff: metric_diff(&test, &train),
        train,
        test,
    })
}

/// When a train/test difference counts as overfitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum OverfitCriterion {
    /// `(test - train) / max(eps, train) > tau` for error metrics; `train - test > tau` for R².
    RelativeGap { tau: f64, eps: f64 },
    /// The validation metric worsened for `k` consecutive epochs while the training metric improved.
    Divergence { k: usize },
}

impl Default for OverfitCriterion {
    fn default() -> Self {
        OverfitCriterion::RelativeGap {
            tau: DEFAULT_TAU,
            eps: DEFAULT_GAP_EPSILON,
        }
    }
}

impl OverfitCriterion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OverfitCriterion::RelativeGap { tau, eps } if tau > 0.0 && eps > 0.0 && tau.is_finite() => Ok(()),
            OverfitCriterion::Divergence { k } if k > 0 => Ok(()),
            _ => Err(Error::invalid(format!("invalid overfit criterion {self:?}"))),
        }
    }

    /// Short description used in report headers.
    pub fn describe(&self) -> String {
        match self {
            OverfitCriterion::RelativeGap { tau, .. } => format!("tau={tau}"),
            OverfitCriterion::Divergence { k } => format!("divergence_k={k}"),
        }
    }
}

/// Per-metric overfit flags; `None` where the metric is undefined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverfitFlags {
    pub rmse: Option<bool>,
    pub mse: Option<bool>,
    pub huber: Option<bool>,
    pub mae: Option<bool>,
    pub msle: Option<bool>,
    pub r2: Option<bool>,
}

impl OverfitFlags {
    pub fn get(&self, m: Metric) -> Option<bool> {
        match m {
            Metric::Rmse => self.rmse,
            Metric::Mse => self.mse,
            Metric::Huber => self.huber,
            Metric::Mae => self.mae,
            Metric::Msle => self.msle,
            Metric::R2 => self.r2,
        }
    }

    fn set(&mut self, m: Metric, v: Option<bool>) {
        let slot = match m {
            Metric::Rmse => &mut self.rmse,
            Metric::Mse => &mut self.mse,
            Metric::Huber => &mut self.huber,
            Metric::Mae => &mut self.mae,
            Metric::Msle => &mut self.msle,
            Metric::R2 => &mut self.r2,
        };
        *slot = v;
    }

    pub fn any(&self) -> bool {
        Metric::ALL.iter().any(|&m| self.get(m) == Some(true))
    }
}

/// Size of the generalization gap for one metric: test worse than train is positive.
pub fn gap(metric: Metric, train: &MetricSet, test: &MetricSet) -> Option<f64> {
    let (a, b) = (metric.of(train)?, metric.of(test)?);
    Some(if metric.lower_is_better() { b - a } else { a - b })
}

/// Flags each metric under `criterion`. The divergence mode reads the history's
/// per-epoch train and validation metrics and needs `history`.
pub fn detect_overfit(
    train: &MetricSet,
    test: &MetricSet,
    history: Option<&TrainingHistory>,
    criterion: &OverfitCriterion,
) -> Result<OverfitFlags> {
    criterion.validate()?;
    let mut flags = OverfitFlags::default();
    for m in Metric::ALL {
        let flag = match *criterion {
            OverfitCriterion::RelativeGap { tau, eps } => gap(m, train, test).map(|g| {
                if m.lower_is_better() {
                    let base = m.of(train).expect("gap defined");
                    g / base.max(eps) > tau
                } else {
                    g > tau
                }
            }),
            OverfitCriterion::Divergence { k } => {
                let h = history.ok_or_else(|| Error::invalid("divergence criterion needs a training history"))?;
                diverges(m, h, k)
            }
        };
        flags.set(m, flag);
    }
    Ok(flags)
}

/// Whether some run of `k` consecutive epochs has the validation metric worsening and the
/// training metric improving at every step.
fn diverges(m: Metric, h: &TrainingHistory, k: usize) -> Option<bool> {
    let series: Option<Vec<(f64, f64)>> = h
        .records
        .iter()
        .map(|r| Some((m.of(&r.train)?, m.of(&r.validation)?)))
        .collect();
    let series = series?;
    let sign = if m.lower_is_better() { 1.0 } else { -1.0 };
    let mut run = 0;
    for w in series.windows(2) {
        let train_better = sign * (w[1].0 - w[0].0) < 0.0;
        let val_worse = sign * (w[1].1 - w[0].1) > 0.0;
        run = if train_better && val_worse { run + 1 } else { 0 };
        if run >= k {
            return Some(true);
        }
    }
    Some(false)
}

/// Everything recorded for one benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: ModelKind,
    pub regime: RegimeId,
    pub test_ratio: f64,
    pub train: MetricSet,
    pub test: MetricSet,
    pub diff: DiffSet,
    pub flags: OverfitFlags,
    pub wall_time_seconds: f64,
    pub history: TrainingHistory,
}

impl EvaluationReport {
    pub fn new(
        model: ModelKind,
        regime: RegimeId,
        test_ratio: f64,
        eval: Evaluation,
        history: TrainingHistory,
        criterion: &OverfitCriterion,
    ) -> Result<Self> {
        let flags = detect_overfit(&eval.train, &eval.test, Some(&history), criterion)?;
        Ok(Self {
            model,
            regime,
            test_ratio,
            train: eval.train,
            test: eval.test,
            diff: eval.diff,
            flags,
            wall_time_seconds: history.total_wall_time,
            history,
        })
    }

    /// Recomputes the flags under a different criterion.
    pub fn reflag(&mut self, criterion: &OverfitCriterion) -> Result<()> {
        self.flags = detect_overfit(&self.train, &self.test, Some(&self.history), criterion)?;
        Ok(())
    }
}
