//! The small noisy problem on which an unregularized, over-wide DNN overfits visibly.
//! Used to compare regimes on the train-test gap and on weight sparsity.

use serde::{Deserialize, Serialize};

use crate::data::{synthesize, SynthConfig};
use crate::error::Result;
use crate::models::ModelKind;
use crate::params::{ParamRole, ParamSet};
use crate::regularization::RegimeId;
use crate::scalar::Scalar;
use crate::training::TrainConfig;

use super::evaluate::EvaluationReport;
use super::matrix::{prepare_split, train_cell, BenchConfig};

/// Weights below this magnitude count as zero in [`weight_sparsity`].
pub const SPARSITY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitFixture {
    pub rows: usize,
    pub noise: f64,
    pub test_ratio: f64,
    pub bench: BenchConfig,
}

impl Default for OverfitFixture {
    fn default() -> Self {
        let mut bench = BenchConfig {
            train: TrainConfig {
                max_epochs: 60,
                ..TrainConfig::default()
            },
            ..BenchConfig::default()
        };
        bench.hidden.insert(ModelKind::Dnn, vec![256, 256, 128]);
        Self {
            rows: 2000,
            noise: 4.0,
            test_ratio: 0.2,
            bench,
        }
    }
}

/// Outcome of one fixture run.
#[derive(Debug, Clone)]
pub struct FixtureRun {
    pub report: EvaluationReport,
    /// Fraction of weight (not bias) entries with magnitude below [`SPARSITY_THRESHOLD`].
    pub sparsity: f64,
}

impl OverfitFixture {
    /// Trains the fixture DNN under `regime`. `seed` picks both the synthetic data and the
    /// training stream.
    pub fn run<T: Scalar>(&self, regime: RegimeId, seed: u64) -> Result<FixtureRun> {
        let frame = synthesize(&SynthConfig {
            noise: self.noise,
            ..SynthConfig::new(seed, self.rows)
        })?;
        let bench = BenchConfig {
            base_seed: seed,
            ..self.bench.clone()
        };
        let split = prepare_split::<T>(&frame, self.test_ratio, &bench)?;
        let (model, report) = train_cell(&split, ModelKind::Dnn, regime, &bench)?;
        Ok(FixtureRun {
            report,
            sparsity: weight_sparsity(&model.params, SPARSITY_THRESHOLD),
        })
    }
}

pub fn weight_sparsity<T: Scalar>(params: &ParamSet<T>, threshold: f64) -> f64 {
    let (mut small, mut total) = (0usize, 0usize);
    for (_, p) in params.iter().filter(|(_, p)| p.role == ParamRole::Weight) {
        total += p.value.len();
        small += p.value.data().iter().filter(|v| v.as_f64().abs() < threshold).count();
    }
    if total == 0 {
        0.0
    } else {
        small as f64 / total as f64
    }
}
