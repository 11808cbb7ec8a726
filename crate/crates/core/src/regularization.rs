//! Regularization regimes: weight penalties, dropout settings and early stopping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamRole, ParamSet};
use crate::scalar::Scalar;

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_PATIENCE: usize = 10;
pub const DEFAULT_MIN_DELTA: f64 = 1e-4;
pub const DEFAULT_DROPOUT: f64 = 0.10;

/// The five regimes: an unregularized baseline and four cumulative combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeId {
    B1,
    R1,
    R2,
    R3,
    R4,
}

impl RegimeId {
    pub const ALL: [RegimeId; 5] = [RegimeId::B1, RegimeId::R1, RegimeId::R2, RegimeId::R3, RegimeId::R4];
    /// Candidates when choosing the most effective regularization; the baseline is excluded.
    pub const REGULARIZED: [RegimeId; 4] = [RegimeId::R1, RegimeId::R2, RegimeId::R3, RegimeId::R4];

    pub fn key(self) -> &'static str {
        match self {
            RegimeId::B1 => "B1",
            RegimeId::R1 => "R1",
            RegimeId::R2 => "R2",
            RegimeId::R3 => "R3",
            RegimeId::R4 => "R4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            RegimeId::B1 => "none",
            RegimeId::R1 => "early stopping",
            RegimeId::R2 => "early stopping + dropout",
            RegimeId::R3 => "early stopping + dropout + L1",
            RegimeId::R4 => "early stopping + dropout + L2",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RegimeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for RegimeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B1" => Ok(RegimeId::B1),
            "R1" => Ok(RegimeId::R1),
            "R2" => Ok(RegimeId::R2),
            "R3" => Ok(RegimeId::R3),
            "R4" => Ok(RegimeId::R4),
            _ => Err(Error::invalid(format!("unknown regime '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    L1,
    L2,
}

/// Concrete settings for one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub early_stopping: bool,
    pub dropout_rate: f64,
    pub penalty: PenaltyKind,
    pub lambda: f64,
    pub patience: usize,
    pub min_delta: f64,
}

/// Values replacing the defaults of [`regime_spec`]. Each applies only where the regime
/// uses the corresponding technique.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegimeOverrides {
    pub lambda: Option<f64>,
    pub patience: Option<usize>,
    pub min_delta: Option<f64>,
    pub dropout: Option<f64>,
}

pub fn regime_spec(id: RegimeId) -> RegimeSpec {
    let (early_stopping, dropout_rate, penalty) = match id {
        RegimeId::B1 => (false, 0.0, PenaltyKind::None),
        RegimeId::R1 => (true, 0.0, PenaltyKind::None),
        RegimeId::R2 => (true, DEFAULT_DROPOUT, PenaltyKind::None),
        RegimeId::R3 => (true, DEFAULT_DROPOUT, PenaltyKind::L1),
        RegimeId::R4 => (true, DEFAULT_DROPOUT, PenaltyKind::L2),
    };
    RegimeSpec {
        early_stopping,
        dropout_rate,
        penalty,
        lambda: if penalty == PenaltyKind::None {
            0.0
        } else {
            DEFAULT_LAMBDA
        },
        patience: DEFAULT_PATIENCE,
        min_delta: DEFAULT_MIN_DELTA,
    }
}

impl RegimeSpec {
    pub fn with_overrides(mut self, o: &RegimeOverrides) -> Result<Self> {
        if self.penalty != PenaltyKind::None {
            if let Some(l) = o.lambda {
                self.lambda = l;
            }
        }
        if self.dropout_rate > 0.0 {
            if let Some(d) = o.dropout {
                self.dropout_rate = d;
            }
        }
        if let Some(p) = o.patience {
            self.patience = p;
        }
        if let Some(m) = o.min_delta {
            self.min_delta = m;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        crate::layers::dropout::check_rate(self.dropout_rate)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("penalty strength {} must be >= 0", self.lambda)));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be positive"));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::invalid("min_delta must be >= 0"));
        }
        Ok(())
    }
}

/// Penalty value over weight tensors (biases excluded): `lambda * sum |w|` or `lambda * sum w^2`.
pub fn penalty_value<T: Scalar>(params: &ParamSet<T>, kind: PenaltyKind, lambda: f64) -> Result<T> {
    check_lambda(lambda)?;
    let lam = T::lit(lambda);
    let mut total = T::zero();
    for (_, p) in params.iter().filter(|(_, p)| p.role == ParamRole::Weight) {
        let s = match kind {
            PenaltyKind::None => T::zero(),
            PenaltyKind::L1 => p.value.data().iter().fold(T::zero(), |a, &w| a + w.abs()),
            PenaltyKind::L2 => p.value.data().iter().fold(T::zero(), |a, &w| a + w * w),
        };
        total += s;
    }
    Ok(lam * total)
}

/// Adds the penalty gradient to every weight's stored gradient and returns the penalty value.
/// L1 uses the subgradient `lambda * sign(w)` with `sign(0) = 0`; L2 adds `2 lambda w`.
pub fn apply_penalty<T: Scalar>(params: &mut ParamSet<T>, kind: PenaltyKind, lambda: f64) -> Result<T> {
    let value = penalty_value(params, kind, lambda)?;
    if kind == PenaltyKind::None || lambda == 0.0 {
        return Ok(value);
    }
    let lam = T::lit(lambda);
    let two_lam = lam + lam;
    for (_, p) in params.iter_mut().filter(|(_, p)| p.role == ParamRole::Weight) {
        for (g, &w) in p.grad.data_mut().iter_mut().zip(p.value.data()) {
            *g += match kind {
                PenaltyKind::L1 => lam * sign(w),
                PenaltyKind::L2 => two_lam * w,
                PenaltyKind::None => T::zero(),
            };
        }
    }
    Ok(value)
}

fn sign<T: Scalar>(w: T) -> T {
    if w > T::zero() {
        T::one()
    } else if w < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("penalty strength {lambda} must be >= 0")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks the monitored validation value and keeps a copy of the best parameters.
///
/// Patience counts epochs since the last observation below `reference - min_delta`, where
/// `reference` is the value at that improvement; equal values do not count. The snapshot
/// follows the lowest value seen, so a restored model always scores the recorded minimum.
#[derive(Debug, Clone)]
pub struct EarlyStopper<T> {
    patience: usize,
    min_delta: f64,
    best_value: f64,
    reference: f64,
    best_epoch: Option<usize>,
    best_snapshot: Option<ParamSet<T>>,
    stall_count: usize,
    last_epoch: Option<usize>,
}

impl<T: Scalar> EarlyStopper<T> {
    pub fn new(patience: usize, min_delta: f64) -> Result<Self> {
        if patience == 0 {
            return Err(Error::invalid("patience must be positive"));
        }
        if !(min_delta >= 0.0) {
            return Err(Error::invalid("min_delta must be >= 0"));
        }
        Ok(Self {
            patience,
            min_delta,
            best_value: f64::INFINITY,
            reference: f64::INFINITY,
            best_epoch: None,
            best_snapshot: None,
            stall_count: 0,
            last_epoch: None,
        })
    }

    pub fn observe(&mut self, epoch: usize, val_metric: f64, params: &ParamSet<T>) -> Result<StopDecision> {
        if !val_metric.is_finite() {
            return Err(Error::NumericOverflow(format!("validation metric at epoch {epoch}")));
        }
        if self.last_epoch.is_some_and(|last| epoch <= last) {
            return Err(Error::invalid(format!("epoch {epoch} observed out of order")));
        }
        self.last_epoch = Some(epoch);
        if val_metric < self.best_value {
            self.best_value = val_metric;
            self.best_epoch = Some(epoch);
            self.best_snapshot = Some(params.clone());
        }
        if val_metric < self.reference - self.min_delta {
            self.reference = val_metric;
            self.stall_count = 0;
        } else {
            self.stall_count += 1;
        }
        Ok(if self.stall_count >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        })
    }

    /// Overwrites `params` with the snapshot from the best epoch.
    pub fn restore_best(&self, params: &mut ParamSet<T>) -> Result<()> {
        let snap = self.best_snapshot.as_ref().ok_or(Error::NoObservations)?;
        params.copy_values_from(snap)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    pub fn stall_count(&self) -> usize {
        self.stall_count
    }

    pub fn patience(&self) -> usize {
        self.patience
    }
}
