//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7                      # base seed for data synthesis and every cell
//! out = "runs/smoke"            # output directory
//! workers = 4                   # threads for `bench`
//! precision = "f64"             # or "f32"
//!
//! [data]
//! csv = "pv.csv"                # omit both csv and schema to use synthetic data
//! schema = "pv.schema.toml"
//!
//! [data.synth]
//! rows = 4000
//! noise = 1.0
//! locations = 12
//!
//! [grid]
//! models = ["dnn", "cnn"]       # default: all seven
//! regimes = ["B1", "R3"]        # default: all five
//! ratios = [0.1, 0.3]           # default: 0.1 .. 0.5
//!
//! [window]
//! lookback = 24
//! horizon = 1
//! shuffled = false
//!
//! [regime]                      # replaces regime defaults where the regime uses them
//! lambda = 1e-4
//! patience = 10
//! min_delta = 1e-4
//! dropout = 0.1
//!
//! [train]
//! max_epochs = 200
//! batch_size = 32
//! learning_rate = 1e-3
//! loss = "mse"                  # or "huber"
//! huber_delta = 1.0
//! clock = "logical"             # or "wall"
//!
//! [analysis]
//! criterion = "relative-gap"    # or "divergence"
//! tau = 0.1
//! k = 3                         # divergence run length
//!
//! [models]
//! ae_beta = 0.5
//! [models.hidden]
//! dnn = [128, 64, 32]
//! ```
//!
//! Every table and key is optional. Unknown keys are rejected. Relative paths inside the
//! file resolve against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pvreg::analysis::{
    BenchConfig, MatrixRequest, OverfitCriterion, DEFAULT_DIVERGENCE_RUN, DEFAULT_GAP_EPSILON, DEFAULT_TAU,
};
use pvreg::data::{SynthConfig, TEST_RATIOS};
use pvreg::models::ModelKind;
use pvreg::regularization::{RegimeId, RegimeOverrides};
use pvreg::training::{Clock, TrainConfig, TrainingLoss};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_OUT: &str = "pvreg-out";
pub const DEFAULT_SYNTH_ROWS: usize = 21045;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub regime: RegimeSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub models: ModelsSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub csv: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub rows: usize,
    pub noise: f64,
    pub locations: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        let base = SynthConfig::new(0, DEFAULT_SYNTH_ROWS);
        Self {
            rows: base.n,
            noise: base.noise,
            locations: base.locations,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub models: Option<Vec<ModelKind>>,
    pub regimes: Option<Vec<RegimeId>>,
    pub ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub lookback: usize,
    pub horizon: usize,
    pub shuffled: bool,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            lookback: pvreg::data::DEFAULT_LOOKBACK,
            horizon: pvreg::data::DEFAULT_HORIZON,
            shuffled: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    pub lambda: Option<f64>,
    pub patience: Option<usize>,
    pub min_delta: Option<f64>,
    pub dropout: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub max_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
    pub loss: Option<TrainingLoss>,
    pub huber_delta: Option<f64>,
    pub clock: Option<Clock>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionMode {
    #[default]
    RelativeGap,
    Divergence,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default)]
    pub criterion: CriterionMode,
    pub tau: Option<f64>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    pub ae_beta: Option<f64>,
    #[serde(default)]
    pub hidden: BTreeMap<ModelKind, Vec<usize>>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths. Does not validate.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.csv, &mut cfg.data.schema, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.data.csv.is_some() != self.data.schema.is_some() {
            return bad("data.csv and data.schema must be given together".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if self.window.lookback == 0 || self.window.horizon == 0 {
            return bad("window.lookback and window.horizon must be positive".into());
        }
        if self.data.csv.is_none() {
            self.synth_config()
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.request().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let bench = self.bench_config();
        bench.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        bench
            .criterion
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for regime in RegimeId::ALL {
            pvreg::regularization::regime_spec(regime)
                .with_overrides(&bench.overrides)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        for kind in self.request().kinds {
            bench
                .model_spec(kind, 1)
                .validate()
                .map_err(|e| CliError::Config(format!("models.hidden.{kind}: {e}")))?;
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            n: self.data.synth.rows,
            locations: self.data.synth.locations,
            noise: self.data.synth.noise,
        }
    }

    pub fn request(&self) -> MatrixRequest {
        MatrixRequest {
            kinds: self.grid.models.clone().unwrap_or_else(|| ModelKind::ALL.to_vec()),
            regimes: self.grid.regimes.clone().unwrap_or_else(|| RegimeId::ALL.to_vec()),
            ratios: self.grid.ratios.clone().unwrap_or_else(|| TEST_RATIOS.to_vec()),
        }
    }

    pub fn criterion(&self) -> OverfitCriterion {
        match self.analysis.criterion {
            CriterionMode::RelativeGap => OverfitCriterion::RelativeGap {
                tau: self.analysis.tau.unwrap_or(DEFAULT_TAU),
                eps: DEFAULT_GAP_EPSILON,
            },
            CriterionMode::Divergence => OverfitCriterion::Divergence {
                k: self.analysis.k.unwrap_or(DEFAULT_DIVERGENCE_RUN),
            },
        }
    }

    /// Training settings. Unlike the library default, the CLI measures time with the
    /// logical clock unless told otherwise, so repeated runs produce identical files.
    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let d = TrainConfig::default();
        TrainConfig {
            max_epochs: t.max_epochs.unwrap_or(d.max_epochs),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            learning_rate: t.learning_rate.unwrap_or(d.learning_rate),
            adam_beta1: t.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: t.adam_beta2.unwrap_or(d.adam_beta2),
            adam_epsilon: t.adam_epsilon.unwrap_or(d.adam_epsilon),
            seed: self.seed,
            training_loss: t.loss.unwrap_or(d.training_loss),
            huber_delta: t.huber_delta.unwrap_or(d.huber_delta),
            clock: t.clock.unwrap_or(Clock::Logical),
        }
    }

    pub fn bench_config(&self) -> BenchConfig {
        let d = BenchConfig::default();
        BenchConfig {
            lookback: self.window.lookback,
            horizon: self.window.horizon,
            train: self.train_config(),
            overrides: RegimeOverrides {
                lambda: self.regime.lambda,
                patience: self.regime.patience,
                min_delta: self.regime.min_delta,
                dropout: self.regime.dropout,
            },
            hidden: self.models.hidden.clone(),
            ae_beta: self.models.ae_beta.unwrap_or(d.ae_beta),
            criterion: self.criterion(),
            base_seed: self.seed,
            shuffled: self.window.shuffled,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}
