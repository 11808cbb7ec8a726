//! The `pvreg` command line: dataset statistics, split plans, synthetic data, single-cell
//! training, the benchmark grid, and report re-rendering.
//!
//! Seed and worker count can also come from `PVREG_SEED` and `PVREG_WORKERS`. Precedence
//! is flag, then environment, then config file, then built-in default.

pub mod config;
pub mod error;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pvreg::analysis::{
    fingerprint, prepare_split, read_matrix, render, run_matrix, train_cell, BenchmarkMatrix, EvaluationReport,
    OverfitCriterion, DEFAULT_GAP_EPSILON, MATRIX_FILE,
};
use pvreg::data::{describe, load_csv, plan_splits, synthesize, Schema, SeriesFrame, StatsTable};
use pvreg::metrics::Metric;
use pvreg::models::{to_tagged_checkpoint_string, ModelKind};
use pvreg::regularization::RegimeId;
use pvreg::Scalar;
use serde::Serialize;

pub use config::{Precision, RunConfig};
pub use error::{CliError, EXIT_OK, EXIT_TRAINING, EXIT_USAGE};

pub const STATS_FILE: &str = "stats.csv";
pub const SYNTH_CSV_FILE: &str = "synth.csv";
pub const SYNTH_SCHEMA_FILE: &str = "synth.schema.toml";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(
    name = "pvreg",
    version,
    about = "Regularization benchmark for PV power forecasting networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the config file.
    #[arg(long, env = "PVREG_SEED")]
    pub seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptive statistics of the dataset's numeric columns.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; needs --schema.
        #[arg(long, requires = "schema")]
        data: Option<PathBuf>,
        /// Schema TOML for --data.
        #[arg(long, requires = "data")]
        schema: Option<PathBuf>,
    },
    /// Train/validation/test sizes for `n` rows at a test ratio.
    SplitPlan {
        n: usize,
        #[arg(long)]
        ratio: f64,
    },
    /// Writes the synthetic dataset and its schema.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Row count; overrides the config file.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Trains and evaluates a single cell.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        regime: RegimeId,
        /// Test ratio; defaults to the first configured ratio.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Runs the model x regime x ratio grid and renders every report.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "PVREG_WORKERS")]
        workers: Option<usize>,
        /// Restricts the grid; repeatable.
        #[arg(long)]
        model: Vec<ModelKind>,
        #[arg(long)]
        regime: Vec<RegimeId>,
        #[arg(long)]
        ratio: Vec<f64>,
        /// Relative-gap overfitting threshold.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Re-renders reports from a saved matrix, optionally with a new threshold.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory holding matrix.json; defaults to the output directory.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        tau: Option<f64>,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Stats { common, data, schema } => {
            let mut cfg = resolve(&common)?;
            if let (Some(d), Some(s)) = (data, schema) {
                cfg.data.csv = Some(d);
                cfg.data.schema = Some(s);
            }
            cfg.validate()?;
            cmd_stats(&cfg)
        }
        Command::SplitPlan { n, ratio } => {
            println!("{}", cmd_split_plan(n, ratio)?);
            Ok(())
        }
        Command::Synth { common, rows } => {
            let mut cfg = resolve(&common)?;
            if let Some(r) = rows {
                cfg.data.synth.rows = r;
            }
            cfg.validate()?;
            cmd_synth(&cfg)
        }
        Command::Train {
            common,
            model,
            regime,
            ratio,
        } => {
            let mut cfg = resolve(&common)?;
            let ratio = ratio.unwrap_or(cfg.request().ratios[0]);
            cfg.grid.models = Some(vec![model]);
            cfg.grid.regimes = Some(vec![regime]);
            cfg.grid.ratios = Some(vec![ratio]);
            cfg.validate()?;
            match cfg.precision {
                Precision::F32 => cmd_train::<f32>(&cfg, model, regime, ratio),
                Precision::F64 => cmd_train::<f64>(&cfg, model, regime, ratio),
            }
        }
        Command::Bench {
            common,
            workers,
            model,
            regime,
            ratio,
            tau,
        } => {
            let mut cfg = resolve(&common)?;
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            if !model.is_empty() {
                cfg.grid.models = Some(model);
            }
            if !regime.is_empty() {
                cfg.grid.regimes = Some(regime);
            }
            if !ratio.is_empty() {
                cfg.grid.ratios = Some(ratio);
            }
            if let Some(t) = tau {
                set_tau(&mut cfg, t)?;
            }
            cfg.validate()?;
            match cfg.precision {
                Precision::F32 => cmd_bench::<f32>(&cfg),
                Precision::F64 => cmd_bench::<f64>(&cfg),
            }
        }
        Command::Report { common, from, tau } => {
            let cfg = resolve(&common)?;
            let out = cfg.out_dir();
            let from = from.unwrap_or_else(|| out.clone());
            cmd_report(&from, &out, tau)
        }
    }
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn set_tau(cfg: &mut RunConfig, tau: f64) -> Result<(), CliError> {
    if cfg.analysis.criterion != config::CriterionMode::RelativeGap {
        return Err(CliError::Usage(
            "--tau applies only to the relative-gap criterion".into(),
        ));
    }
    cfg.analysis.tau = Some(tau);
    Ok(())
}

/// The configured dataset, or the synthetic series when none is given.
pub fn load_frame(cfg: &RunConfig) -> Result<SeriesFrame, CliError> {
    let frame = match (&cfg.data.csv, &cfg.data.schema) {
        (Some(csv), Some(schema)) => {
            let schema = Schema::load(schema).map_err(CliError::Data)?;
            load_csv(csv, &schema).map_err(CliError::Data)?
        }
        _ => synthesize(&cfg.synth_config()).map_err(CliError::Data)?,
    };
    if frame.dropped_rows() > 0 {
        eprintln!(
            "pvreg: dropped {} unusable rows, kept {}",
            frame.dropped_rows(),
            frame.n()
        );
    }
    Ok(frame)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::output(path, e))
}

pub fn cmd_split_plan(n: usize, ratio: f64) -> Result<String, CliError> {
    let plan = plan_splits(n, ratio).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(format!(
        "train {}, val {}, test {}",
        plan.n_train, plan.n_val, plan.n_test
    ))
}

/// Aligned text rendering of a stats table.
pub fn format_stats(table: &StatsTable) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"));
    let width = table.columns.iter().map(|c| c.name.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "{:<width$} {:>7} {:>12} {:>12} {:>12} {:>10} {:>10}\n",
        "column", "n", "mean", "median", "std_dev", "skewness", "kurtosis"
    );
    for c in &table.columns {
        writeln!(
            out,
            "{:<width$} {:>7} {:>12.4} {:>12.4} {:>12.4} {:>10} {:>10}",
            c.name,
            c.n,
            c.mean,
            c.median,
            c.std_dev,
            opt(c.skewness),
            opt(c.kurtosis)
        )
        .unwrap();
    }
    out
}

fn cmd_stats(cfg: &RunConfig) -> Result<(), CliError> {
    let frame = load_frame(cfg)?;
    let table = describe(&frame).map_err(CliError::Data)?;
    let fp = fingerprint(&(&cfg.data, cfg.seed), &frame);
    let dir = cfg.out_dir();
    create_dir(&dir)?;
    let path = dir.join(STATS_FILE);
    write_file(&path, &format!("# fingerprint={fp}\n{}", table.to_csv()))?;
    print!("{}", format_stats(&table));
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_synth(cfg: &RunConfig) -> Result<(), CliError> {
    let frame = synthesize(&cfg.synth_config()).map_err(CliError::Data)?;
    let fp = fingerprint(&cfg.synth_config(), &frame);
    let dir = cfg.out_dir();
    create_dir(&dir)?;
    let csv_path = dir.join(SYNTH_CSV_FILE);
    let mut csv = format!("# fingerprint={fp}\n").into_bytes();
    frame.write_csv(&mut csv).map_err(|e| CliError::output(&csv_path, e))?;
    fs::write(&csv_path, csv).map_err(|e| CliError::output(&csv_path, e))?;
    let schema_path = dir.join(SYNTH_SCHEMA_FILE);
    write_file(
        &schema_path,
        &format!("# fingerprint={fp}\n{}", frame.schema().to_toml_string()),
    )?;
    println!(
        "wrote {} rows to {} and {}",
        frame.n(),
        csv_path.display(),
        schema_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct HistoryHeader<'a> {
    fingerprint: &'a str,
    model: ModelKind,
    regime: RegimeId,
    test_ratio: f64,
}

#[derive(Serialize)]
struct TaggedReport<'a> {
    fingerprint: &'a str,
    report: &'a EvaluationReport,
}

/// One line naming the metrics flagged as overfit, or "none".
pub fn flagged_metrics(report: &EvaluationReport) -> String {
    let names: Vec<&str> = Metric::ALL
        .into_iter()
        .filter(|&m| report.flags.get(m) == Some(true))
        .map(Metric::label)
        .collect();
    if names.is_empty() {
        "none".into()
    } else {
        names.join(", ")
    }
}

fn cmd_train<T: Scalar>(cfg: &RunConfig, kind: ModelKind, regime: RegimeId, ratio: f64) -> Result<(), CliError> {
    let frame = load_frame(cfg)?;
    let bench = cfg.bench_config();
    let split = prepare_split::<T>(&frame, ratio, &bench).map_err(CliError::Data)?;
    let fp = fingerprint(&(&bench, kind, regime, ratio), &frame);
    eprintln!(
        "pvreg: training {kind}/{regime}/{ratio} ({} windows)",
        split.windows.train.len()
    );
    let (model, report) = train_cell(&split, kind, regime, &bench).map_err(CliError::Training)?;

    let dir = cfg.out_dir();
    create_dir(&dir)?;
    let header = HistoryHeader {
        fingerprint: &fp,
        model: kind,
        regime,
        test_ratio: ratio,
    };
    let history = serde_json::to_string(&header).expect("header serializes") + "\n" + &report.history.to_json_lines();
    write_file(&dir.join(HISTORY_FILE), &history)?;
    let ckpt = to_tagged_checkpoint_string(&model, &[&format!("fingerprint={fp}")]).map_err(CliError::Training)?;
    write_file(&dir.join(CHECKPOINT_FILE), &ckpt)?;
    let tagged = TaggedReport {
        fingerprint: &fp,
        report: &report,
    };
    write_file(
        &dir.join(REPORT_FILE),
        &(serde_json::to_string_pretty(&tagged).expect("report serializes") + "\n"),
    )?;
    println!(
        "{kind}/{regime}/{ratio}: {} epochs, train RMSE {:.4}, test RMSE {:.4}, overfit: {}",
        report.history.records.len(),
        report.train.rmse,
        report.test.rmse,
        flagged_metrics(&report)
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_bench<T: Scalar>(cfg: &RunConfig) -> Result<(), CliError> {
    let frame = load_frame(cfg)?;
    let request = cfg.request();
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let total = request.kinds.len() * request.regimes.len() * request.ratios.len();
    eprintln!("pvreg: running {total} cells, {workers} worker thread(s)");
    let matrix = run_matrix::<T>(&request, &frame, &cfg.bench_config(), workers).map_err(CliError::Data)?;
    emit(&matrix, &cfg.out_dir())?;
    let failed: Vec<_> = matrix.failures().collect();
    for cell in &failed {
        eprintln!(
            "pvreg: cell {}/{}/{} failed: {}",
            cell.model,
            cell.regime,
            cell.test_ratio,
            cell.error.as_deref().unwrap_or("unknown error")
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CellsFailed {
            failed: failed.len(),
            total,
        })
    }
}

fn emit(matrix: &BenchmarkMatrix, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    let files = render(matrix, out).map_err(|e| CliError::output(out, e))?;
    println!(
        "wrote {}, {}, {}, {}, {} and {} curve charts to {}",
        file_name(&files.matrix),
        file_name(&files.overfit_table),
        file_name(&files.best_regime),
        file_name(&files.curves),
        file_name(&files.time_vs_diff),
        files.curve_charts.len(),
        out.display()
    );
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn cmd_report(from: &Path, out: &Path, tau: Option<f64>) -> Result<(), CliError> {
    let mut matrix = read_matrix(&from.join(MATRIX_FILE)).map_err(CliError::Data)?;
    if let Some(tau) = tau {
        let eps = match matrix.criterion {
            OverfitCriterion::RelativeGap { eps, .. } => eps,
            OverfitCriterion::Divergence { .. } => DEFAULT_GAP_EPSILON,
        };
        matrix
            .reflag(OverfitCriterion::RelativeGap { tau, eps })
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    emit(&matrix, out)
}
