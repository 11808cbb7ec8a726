//! Mini-batch training with Adam, regime wiring and per-epoch history.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{PartitionWindows, WindowSet};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::metrics::{all_metrics, huber_point, HuberParams, MetricSet, DEFAULT_HUBER_DELTA};
use crate::models::{Model, OutputGrads};
use crate::params::ParamSet;
use crate::regularization::{apply_penalty, penalty_value, EarlyStopper, RegimeSpec, StopDecision};
use crate::rng::{derive_seed, SeededRng};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Windows per forward pass when computing epoch metrics.
const EVAL_CHUNK: usize = 512;
const SHUFFLE_STREAM: u64 = 0x7368;
const DROPOUT_STREAM: u64 = 0x6472;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingLoss {
    Mse,
    Huber,
}

/// How epoch durations are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Elapsed wall-clock seconds.
    Wall,
    /// A deterministic cost estimate in nominal seconds: scalar parameters times windows
    /// processed, at one nanosecond per product. Reproducible across machines and thread counts.
    Logical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub training_loss: TrainingLoss,
    pub huber_delta: f64,
    pub clock: Clock,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            training_loss: TrainingLoss::Mse,
            huber_delta: DEFAULT_HUBER_DELTA,
            clock: Clock::Wall,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("max_epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be > 0",
                self.learning_rate
            )));
        }
        if !unit(self.adam_beta1) || !unit(self.adam_beta2) {
            return Err(Error::invalid("adam betas must lie in (0, 1)"));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::invalid("adam epsilon must be > 0"));
        }
        HuberParams::new(self.huber_delta)?;
        Ok(())
    }

    fn huber(&self) -> HuberParams {
        HuberParams {
            delta: self.huber_delta,
        }
    }
}

/// Adam moment estimates, one pair per parameter in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        let zeros: Vec<Tensor<T>> = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update using the gradients stored in `params`.
pub fn adam_step<T: Scalar>(params: &mut ParamSet<T>, state: &mut OptimizerState<T>, cfg: &TrainConfig) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::invalid("optimizer state does not match the parameter set"));
    }
    for (name, p) in params.iter() {
        if !p.grad.is_finite() {
            return Err(Error::NumericOverflow(format!("gradient of {name}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(cfg.adam_beta1), T::lit(cfg.adam_beta2));
    let one = T::one();
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = T::lit(cfg.learning_rate);
    let eps = T::lit(cfg.adam_epsilon);
    for (i, (name, p)) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        if m.shape() != p.value.shape() {
            return Err(Error::shape("adam_step", format!("moment shape differs for {name}")));
        }
        let values = p.value.data_mut();
        for (((w, &g), mi), vi) in values.iter_mut().zip(p.grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mi = b1 * *mi + (one - b1) * g;
            *vi = b2 * *vi + (one - b2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Components of one batch's objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss<T> {
    pub data: T,
    pub reconstruction: T,
    pub penalty: T,
    pub total: T,
}

/// Forward and backward pass on one batch. Parameter gradients are overwritten with the
/// gradient of `data loss + penalty + beta * reconstruction MSE` (the last term for
/// autoencoders only).
pub fn loss_and_grad<T: Scalar>(
    model: &mut Model<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    regime: &RegimeSpec,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<BatchLoss<T>> {
    let batch = x.shape().first().copied().unwrap_or(0);
    if batch == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if y.shape() != [batch, 1] {
        return Err(Error::shape(
            "loss_and_grad",
            format!("targets {:?} for batch {batch}", y.shape()),
        ));
    }
    let mut pass = model.forward(x, Mode::Train, rng)?;
    let n = T::lit(batch as f64);
    let delta = T::lit(cfg.huber_delta);
    let mut data = T::zero();
    let mut d_pred = Vec::with_capacity(batch);
    for (&p, &t) in pass.prediction.data().iter().zip(y.data()) {
        let r = p - t;
        match cfg.training_loss {
            TrainingLoss::Mse => {
                data += r * r;
                d_pred.push((r + r) / n);
            }
            TrainingLoss::Huber => {
                data += huber_point(r, delta);
                d_pred.push(r.max(-delta).min(delta) / n);
            }
        }
    }
    data /= n;

    let mut reconstruction = T::zero();
    let d_recon = match &pass.reconstruction {
        Some(recon) => {
            let beta = T::lit(model.spec.ae_beta);
            let flat = x.data();
            let count = T::lit(recon.len() as f64);
            let mut grad = Vec::with_capacity(recon.len());
            for (&r, &v) in recon.data().iter().zip(flat) {
                let d = r - v;
                reconstruction += d * d;
                grad.push(beta * (d + d) / count);
            }
            reconstruction /= count;
            Some(Tensor::from_vec(recon.shape(), grad)?)
        }
        None => None,
    };
    let grads = OutputGrads {
        prediction: Tensor::from_vec(&[batch, 1], d_pred)?,
        reconstruction: d_recon,
    };
    model.backward(&mut pass.cache, &grads)?;
    let penalty = apply_penalty(&mut model.params, regime.penalty, regime.lambda)?;
    let total = data + penalty + T::lit(model.spec.ae_beta) * reconstruction;
    if !total.is_finite() {
        return Err(Error::NumericOverflow("training loss".into()));
    }
    Ok(BatchLoss {
        data,
        reconstruction,
        penalty,
        total,
    })
}

/// Metrics and timing for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: MetricSet,
    pub validation: MetricSet,
    pub penalty: f64,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    pub stopped_early: bool,
    /// Epoch whose parameters the model holds: the restored best epoch under early
    /// stopping, else the last epoch.
    pub best_epoch: usize,
    pub total_wall_time: f64,
}

impl TrainingHistory {
    /// One JSON object per epoch, newline-terminated.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn min_val_mse(&self) -> Option<f64> {
        self.records.iter().map(|r| r.validation.mse).reduce(f64::min)
    }
}

/// Something the epoch loop can drive: a model with its data, or a scripted stand-in.
pub trait Learner<T: Scalar> {
    /// Runs one pass over the training data. Epochs are numbered from 1.
    fn run_epoch(&mut self, epoch: usize) -> Result<()>;
    /// Train and validation metrics at the current parameters.
    fn evaluate(&self) -> Result<(MetricSet, MetricSet)>;
    /// Current penalty value.
    fn penalty(&self) -> Result<f64>;
    /// Cost units of the last epoch for [`Clock::Logical`].
    fn epoch_cost(&self) -> f64;
    fn params(&self) -> &ParamSet<T>;
    fn params_mut(&mut self) -> &mut ParamSet<T>;
}

/// The epoch loop: run, evaluate, record, and (when the regime asks for it) stop early and
/// restore the best parameters.
pub fn fit<T: Scalar, L: Learner<T>>(
    learner: &mut L,
    regime: &RegimeSpec,
    max_epochs: usize,
    clock: Clock,
) -> Result<TrainingHistory> {
    regime.validate()?;
    let mut stopper = if regime.early_stopping {
        Some(EarlyStopper::new(regime.patience, regime.min_delta)?)
    } else {
        None
    };
    let mut records = Vec::new();
    let mut total = 0.0;
    let mut stopped_early = false;
    for epoch in 1..=max_epochs {
        let started = Instant::now();
        learner.run_epoch(epoch)?;
        let (train, validation) = learner.evaluate()?;
        let penalty = learner.penalty()?;
        let elapsed = match clock {
            Clock::Wall => started.elapsed().as_secs_f64().max(1e-9),
            Clock::Logical => learner.epoch_cost() * 1e-9,
        };
        total += elapsed;
        let val_mse = validation.mse;
        records.push(EpochRecord {
            epoch,
            train,
            validation,
            penalty,
            wall_time_seconds: elapsed,
        });
        if let Some(s) = stopper.as_mut() {
            if s.observe(epoch, val_mse, learner.params())? == StopDecision::Stop {
                stopped_early = epoch < max_epochs;
                break;
            }
        }
    }
    let best_epoch = match &stopper {
        Some(s) => {
            s.restore_best(learner.params_mut())?;
            s.best_epoch().expect("observed at least one epoch")
        }
        None => records.len(),
    };
    Ok(TrainingHistory {
        records,
        stopped_early,
        best_epoch,
        total_wall_time: total,
    })
}

/// Eval-mode metrics of `model` on a window set, in the units of the windows.
pub fn window_metrics<T: Scalar>(model: &Model<T>, set: &WindowSet<T>, huber: HuberParams) -> Result<MetricSet> {
    if set.is_empty() {
        return Err(Error::invalid("no windows to evaluate"));
    }
    let pred = model.predict(&set.inputs, EVAL_CHUNK)?;
    all_metrics(&set.targets, &pred, huber)
}

/// A model bound to its training data and regime.
pub struct ModelLearner<'a, T: Scalar> {
    pub model: Model<T>,
    windows: &'a PartitionWindows<T>,
    regime: &'a RegimeSpec,
    cfg: &'a TrainConfig,
    optimizer: OptimizerState<T>,
}

impl<'a, T: Scalar> ModelLearner<'a, T> {
    pub fn new(
        mut model: Model<T>,
        windows: &'a PartitionWindows<T>,
        regime: &'a RegimeSpec,
        cfg: &'a TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if windows.train.is_empty() || windows.val.is_empty() {
            return Err(Error::invalid("training needs non-empty train and validation windows"));
        }
        model.set_dropout_rate(regime.dropout_rate)?;
        let optimizer = OptimizerState::new(&model.params);
        Ok(Self {
            model,
            windows,
            regime,
            cfg,
            optimizer,
        })
    }
}

impl<T: Scalar> Learner<T> for ModelLearner<'_, T> {
    fn run_epoch(&mut self, epoch: usize) -> Result<()> {
        let train = &self.windows.train;
        let mut order: Vec<usize> = (0..train.len()).collect();
        let epoch_seed = derive_seed(&[self.cfg.seed, epoch as u64]);
        SeededRng::new(epoch_seed, SHUFFLE_STREAM).shuffle(&mut order);
        let mut dropout_rng = SeededRng::new(epoch_seed, DROPOUT_STREAM);
        for (b, idx) in order.chunks(self.cfg.batch_size).enumerate() {
            let (x, y) = train.batch(idx)?;
            let fail = |e: Error| Error::Training {
                epoch,
                batch: b,
                reason: e.to_string(),
            };
            loss_and_grad(&mut self.model, &x, &y, self.regime, self.cfg, &mut dropout_rng).map_err(fail)?;
            adam_step(&mut self.model.params, &mut self.optimizer, self.cfg).map_err(fail)?;
        }
        Ok(())
    }

    fn evaluate(&self) -> Result<(MetricSet, MetricSet)> {
        let h = self.cfg.huber();
        Ok((
            window_metrics(&self.model, &self.windows.train, h)?,
            window_metrics(&self.model, &self.windows.val, h)?,
        ))
    }

    fn penalty(&self) -> Result<f64> {
        Ok(penalty_value(&self.model.params, self.regime.penalty, self.regime.lambda)?.as_f64())
    }

    fn epoch_cost(&self) -> f64 {
        // one training pass (forward and backward, counted as three) plus two evaluation passes
        let windows = 3 * self.windows.train.len() + self.windows.train.len() + self.windows.val.len();
        (self.model.param_count() * windows) as f64
    }

    fn params(&self) -> &ParamSet<T> {
        &self.model.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.model.params
    }
}

/// Trains `model` on the windows under `regime`. Epoch metrics are in the (scaled) units of
/// the windows.
pub fn train<T: Scalar>(
    model: Model<T>,
    windows: &PartitionWindows<T>,
    regime: &RegimeSpec,
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainingHistory)> {
    let mut learner = ModelLearner::new(model, windows, regime, cfg)?;
    let history = fit(&mut learner, regime, cfg.max_epochs, cfg.clock)?;
    Ok((learner.model, history))
}
