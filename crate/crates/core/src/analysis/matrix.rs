use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    encode_categoricals, fit_scaler, make_windows, plan_splits, shuffled_windows, ColumnData, PartitionWindows, Scaler,
    SeriesFrame,
};
use crate::error::{Error, Result};
use crate::metrics::{HuberParams, Metric};
use crate::models::{build, Model, ModelKind, ModelSpec};
use crate::regularization::{regime_spec, RegimeId, RegimeOverrides};
use crate::rng::{derive_seed, SeededRng};
use crate::scalar::Scalar;
use crate::training::{train, TrainConfig};

use super::evaluate::{evaluate, gap, EvaluationReport, OverfitCriterion};

/// Settings shared by every cell of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub train: TrainConfig,
    pub overrides: RegimeOverrides,
    /// Hidden sizes replacing a kind's defaults.
    pub hidden: BTreeMap<ModelKind, Vec<usize>>,
    pub ae_beta: f64,
    pub criterion: OverfitCriterion,
    pub base_seed: u64,
    /// Deal shuffled windows to partitions instead of splitting chronologically.
    pub shuffled: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lookback: crate::data::DEFAULT_LOOKBACK,
            horizon: crate::data::DEFAULT_HORIZON,
            train: TrainConfig::default(),
            overrides: RegimeOverrides::default(),
            hidden: BTreeMap::new(),
            ae_beta: 0.5,
            criterion: OverfitCriterion::default(),
            base_seed: 0,
            shuffled: false,
        }
    }
}

impl BenchConfig {
    pub fn model_spec(&self, kind: ModelKind, features: usize) -> ModelSpec {
        let mut spec = ModelSpec::new(kind, self.lookback, features).with_beta(self.ae_beta);
        if let Some(h) = self.hidden.get(&kind) {
            spec = spec.with_hidden(h.clone());
        }
        spec
    }
}

/// The cells to run: the cross product of the three lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRequest {
    pub kinds: Vec<ModelKind>,
    pub regimes: Vec<RegimeId>,
    pub ratios: Vec<f64>,
}

impl MatrixRequest {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.regimes.is_empty() || self.ratios.is_empty() {
            return Err(Error::invalid(
                "benchmark request needs at least one model, regime and ratio",
            ));
        }
        for r in &self.ratios {
            if !(*r > 0.0 && *r <= 0.5) {
                return Err(Error::invalid(format!("test ratio {r} outside (0, 0.5]")));
            }
        }
        Ok(())
    }
}

/// Ratio as an integer number of thousandths, used in seeds and lookups.
pub fn ratio_key(r: f64) -> u64 {
    (r * 1000.0).round() as u64
}

pub fn cell_seed(base: u64, kind: ModelKind, regime: RegimeId, ratio: f64) -> u64 {
    derive_seed(&[base, kind.index() as u64, regime.index() as u64, ratio_key(ratio)])
}

/// One cell: its report, or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ModelKind,
    pub regime: RegimeId,
    pub test_ratio: f64,
    pub seed: u64,
    pub report: Option<EvaluationReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMatrix {
    pub fingerprint: String,
    pub base_seed: u64,
    pub criterion: OverfitCriterion,
    /// Ordered by model, then regime, then ratio as requested.
    pub cells: Vec<CellResult>,
}

impl BenchmarkMatrix {
    pub fn get(&self, kind: ModelKind, regime: RegimeId, ratio: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.model == kind && c.regime == regime && ratio_key(c.test_ratio) == ratio_key(ratio))
    }

    pub fn report(&self, kind: ModelKind, regime: RegimeId, ratio: f64) -> Option<&EvaluationReport> {
        self.get(kind, regime, ratio).and_then(|c| c.report.as_ref())
    }

    pub fn kinds(&self) -> Vec<ModelKind> {
        let mut v: Vec<ModelKind> = self.cells.iter().map(|c| c.model).collect();
        v.dedup();
        v
    }

    pub fn ratios(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !v.iter().any(|r| ratio_key(*r) == ratio_key(c.test_ratio)) {
                v.push(c.test_ratio);
            }
        }
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    /// Replaces the criterion and recomputes every cell's flags.
    pub fn reflag(&mut self, criterion: OverfitCriterion) -> Result<()> {
        criterion.validate()?;
        for c in self.cells.iter_mut() {
            if let Some(r) = c.report.as_mut() {
                r.reflag(&criterion)?;
            }
        }
        self.criterion = criterion;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("matrix json: {e}")))
    }
}

/// Gap and test value of one regime, for choosing the most effective one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeCandidate {
    pub regime: RegimeId,
    pub gap: f64,
    pub test: f64,
}

/// Smallest gap wins; ties go to the better test value (lower, or higher for R²), then to
/// the earlier regime.
pub fn choose_regime(candidates: &[RegimeCandidate], metric: Metric) -> Result<RegimeId> {
    let better_test = |a: f64, b: f64| if metric.lower_is_better() { a < b } else { a > b };
    let mut best: Option<&RegimeCandidate> = None;
    for c in candidates {
        if !c.gap.is_finite() || !c.test.is_finite() {
            return Err(Error::Domain(format!("{} gap undefined for {}", metric, c.regime)));
        }
        best = match best {
            None => Some(c),
            Some(b) => {
                let wins = c.gap < b.gap
                    || (c.gap == b.gap && better_test(c.test, b.test))
                    || (c.gap == b.gap && c.test == b.test && c.regime < b.regime);
                Some(if wins { c } else { b })
            }
        };
    }
    best.map(|c| c.regime)
        .ok_or_else(|| Error::invalid("no regimes to choose from"))
}

/// The regularized regime (R1..R4) with the smallest test-minus-train gap for `metric`.
pub fn best_regime(matrix: &BenchmarkMatrix, kind: ModelKind, ratio: f64, metric: Metric) -> Result<RegimeId> {
    let mut candidates = Vec::new();
    let mut missing = Vec::new();
    for regime in RegimeId::REGULARIZED {
        match matrix.report(kind, regime, ratio) {
            Some(r) => {
                let g = gap(metric, &r.train, &r.test)
                    .ok_or_else(|| Error::Domain(format!("{metric} undefined for {kind:?}/{regime}")))?;
                candidates.push(RegimeCandidate {
                    regime,
                    gap: g,
                    test: metric.of(&r.test).expect("gap defined"),
                });
            }
            None => missing.push(format!("{}/{regime}/{ratio}", kind.key())),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing.join(", ")));
    }
    choose_regime(&candidates, metric)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRegimeRow {
    pub model: ModelKind,
    pub test_ratio: f64,
    /// `None` where the choice is impossible (missing cells or an undefined metric).
    pub choices: BTreeMap<Metric, Option<RegimeId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRegimeTable {
    pub rows: Vec<BestRegimeRow>,
}

pub fn best_regime_table(matrix: &BenchmarkMatrix) -> BestRegimeTable {
    let mut rows = Vec::new();
    for kind in matrix.kinds() {
        for ratio in matrix.ratios() {
            let choices = Metric::ALL
                .iter()
                .map(|&m| (m, best_regime(matrix, kind, ratio, m).ok()))
                .collect();
            rows.push(BestRegimeRow {
                model: kind,
                test_ratio: ratio,
                choices,
            });
        }
    }
    BestRegimeTable { rows }
}

/// Hex SHA-256 prefix of the config's canonical JSON and the data contents.
pub fn fingerprint<C: Serialize>(config: &C, frame: &SeriesFrame) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    for (spec, col) in frame.schema().columns().iter().zip(frame.columns()) {
        h.update(spec.name.as_bytes());
        match col {
            ColumnData::Numeric(v) => v.iter().for_each(|x| h.update(x.to_bits().to_le_bytes())),
            ColumnData::Categorical(v) => v.iter().for_each(|s| {
                h.update(s.as_bytes());
                h.update([0]);
            }),
        }
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Encoded and scaled data for one test ratio.
pub struct PreparedSplit<T> {
    pub ratio: f64,
    pub windows: PartitionWindows<T>,
    pub scaler: Scaler,
}

/// Encodes categoricals, splits, fits the scaler on training rows, and cuts windows.
pub fn prepare_split<T: Scalar>(frame: &SeriesFrame, ratio: f64, cfg: &BenchConfig) -> Result<PreparedSplit<T>> {
    let encoded = encode_categoricals(frame)?;
    let (windows, scaler) = if cfg.shuffled {
        let seed = derive_seed(&[cfg.base_seed, ratio_key(ratio)]);
        let (_, rows) = shuffled_windows::<T>(&encoded, ratio, cfg.lookback, cfg.horizon, seed)?;
        let scaler = Scaler::fit_rows(&encoded, rows.iter().copied())?;
        let scaled = scaler.apply(&encoded)?;
        (
            shuffled_windows(&scaled, ratio, cfg.lookback, cfg.horizon, seed)?.0,
            scaler,
        )
    } else {
        let plan = plan_splits(encoded.n(), ratio)?;
        let scaler = fit_scaler(&encoded, &plan)?;
        let scaled = scaler.apply(&encoded)?;
        (make_windows(&scaled, &plan, cfg.lookback, cfg.horizon)?, scaler)
    };
    Ok(PreparedSplit { ratio, windows, scaler })
}

/// Trains and evaluates one cell on prepared data.
pub fn run_cell<T: Scalar>(
    split: &PreparedSplit<T>,
    kind: ModelKind,
    regime: RegimeId,
    cfg: &BenchConfig,
) -> Result<EvaluationReport> {
    train_cell(split, kind, regime, cfg).map(|(_, report)| report)
}

/// [`run_cell`], also handing back the trained model.
pub fn train_cell<T: Scalar>(
    split: &PreparedSplit<T>,
    kind: ModelKind,
    regime: RegimeId,
    cfg: &BenchConfig,
) -> Result<(Model<T>, EvaluationReport)> {
    let seed = cell_seed(cfg.base_seed, kind, regime, split.ratio);
    let regime_cfg = regime_spec(regime).with_overrides(&cfg.overrides)?;
    let spec = cfg.model_spec(kind, split.windows.train.features());
    let model = build::<T>(&spec, &mut SeededRng::new(seed, 1))?;
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let (model, history) = train(model, &split.windows, &regime_cfg, &train_cfg)?;
    let eval = evaluate(
        &model,
        &split.windows,
        &split.scaler,
        HuberParams {
            delta: train_cfg.huber_delta,
        },
    )?;
    let report = EvaluationReport::new(kind, regime, split.ratio, eval, history, &cfg.criterion)?;
    Ok((model, report))
}

/// Runs every requested cell on a pool of `workers` threads. Each cell's seed depends only
/// on its key, and results are assembled in key order, so the matrix does not depend on
/// the worker count. A failing cell records its error and the rest carry on.
pub fn run_matrix<T: Scalar>(
    request: &MatrixRequest,
    frame: &SeriesFrame,
    cfg: &BenchConfig,
    workers: usize,
) -> Result<BenchmarkMatrix> {
    request.validate()?;
    cfg.criterion.validate()?;
    cfg.train.validate()?;
    let splits: Vec<PreparedSplit<T>> = request
        .ratios
        .iter()
        .map(|&r| prepare_split(frame, r, cfg))
        .collect::<Result<_>>()?;
    let mut keys = Vec::new();
    for &kind in &request.kinds {
        for &regime in &request.regimes {
            for split in &splits {
                keys.push((kind, regime, split));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let cells: Vec<CellResult> = pool.install(|| {
        keys.par_iter()
            .map(|&(kind, regime, split)| {
                let outcome = run_cell(split, kind, regime, cfg);
                CellResult {
                    model: kind,
                    regime,
                    test_ratio: split.ratio,
                    seed: cell_seed(cfg.base_seed, kind, regime, split.ratio),
                    error: outcome.as_ref().err().map(ToString::to_string),
                    report: outcome.ok(),
                }
            })
            .collect()
    });
    Ok(BenchmarkMatrix {
        fingerprint: fingerprint(&(request, cfg), frame),
        base_seed: cfg.base_seed,
        criterion: cfg.criterion,
        cells,
    })
}
