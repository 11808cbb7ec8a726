use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::models::ModelKind;
use crate::regularization::RegimeId;
use crate::training::TrainingHistory;

use super::evaluate::EvaluationReport;
use super::matrix::{best_regime_table, BenchmarkMatrix};

pub const OVERFIT_TABLE_FILE: &str = "overfit_table.csv";
pub const BEST_REGIME_FILE: &str = "best_regime.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const CURVES_DIR: &str = "curves";
pub const TIME_VS_DIFF_FILE: &str = "time_vs_diff.csv";
pub const MATRIX_FILE: &str = "matrix.json";

/// Paths written by [`render`].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFiles {
    pub overfit_table: PathBuf,
    pub best_regime: PathBuf,
    pub curves: PathBuf,
    pub curve_charts: Vec<PathBuf>,
    pub time_vs_diff: PathBuf,
    pub matrix: PathBuf,
}

/// `0.1` -> `10%`
pub fn percent(r: f64) -> String {
    let p = r * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}%", p.round() as i64)
    } else {
        format!("{p}%")
    }
}

fn header_line(matrix: &BenchmarkMatrix) -> String {
    format!("# fingerprint={},{}\n", matrix.fingerprint, matrix.criterion.describe())
}

fn csv_text(matrix: &BenchmarkMatrix, rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(header_line(matrix) + &String::from_utf8(body).expect("csv output is utf-8"))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn metric_labels() -> impl Iterator<Item = String> {
    Metric::ALL.iter().map(|m| m.label().to_string())
}

/// Rows are (model, regime); each metric cell lists the ratios where that metric was
/// flagged, e.g. `10%, 30%`.
pub fn overfit_table_csv(matrix: &BenchmarkMatrix) -> Result<String> {
    let mut rows = vec![["Model".to_string(), "Regime".to_string()]
        .into_iter()
        .chain(metric_labels())
        .collect()];
    for kind in matrix.kinds() {
        for regime in RegimeId::ALL {
            let cells: Vec<&EvaluationReport> = matrix
                .cells
                .iter()
                .filter(|c| c.model == kind && c.regime == regime)
                .filter_map(|c| c.report.as_ref())
                .collect();
            if cells.is_empty() {
                continue;
            }
            let mut row = vec![kind.label().to_string(), regime.key().to_string()];
            for m in Metric::ALL {
                let mut ratios: Vec<f64> = cells
                    .iter()
                    .filter(|r| r.flags.get(m) == Some(true))
                    .map(|r| r.test_ratio)
                    .collect();
                ratios.sort_by(f64::total_cmp);
                row.push(ratios.into_iter().map(percent).collect::<Vec<_>>().join(", "));
            }
            rows.push(row);
        }
    }
    csv_text(matrix, rows)
}

/// Rows are (model, ratio); cells name the most effective regime for each metric.
pub fn best_regime_csv(matrix: &BenchmarkMatrix) -> Result<String> {
    let table = best_regime_table(matrix);
    let mut rows = vec![["Model".to_string(), "Ratio".to_string()]
        .into_iter()
        .chain(metric_labels())
        .collect()];
    for r in table.rows {
        let mut row = vec![r.model.label().to_string(), percent(r.test_ratio)];
        row.extend(
            Metric::ALL
                .iter()
                .map(|m| r.choices[m].map_or_else(|| "n/a".to_string(), |g| g.key().to_string())),
        );
        rows.push(row);
    }
    csv_text(matrix, rows)
}

/// Per-epoch train and validation MSE of every cell.
pub fn curves_csv(matrix: &BenchmarkMatrix) -> Result<String> {
    let mut rows = vec![[
        "model",
        "regime",
        "ratio",
        "epoch",
        "train_mse",
        "val_mse",
        "train_rmse",
        "val_rmse",
        "penalty",
        "epoch_seconds",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()];
    for c in &matrix.cells {
        let Some(r) = &c.report else { continue };
        for e in &r.history.records {
            rows.push(vec![
                c.model.key().to_string(),
                c.regime.key().to_string(),
                num(c.test_ratio),
                e.epoch.to_string(),
                num(e.train.mse),
                num(e.validation.mse),
                num(e.train.rmse),
                num(e.validation.rmse),
                num(e.penalty),
                num(e.wall_time_seconds),
            ]);
        }
    }
    csv_text(matrix, rows)
}

/// Training time against each test-minus-train difference.
pub fn time_vs_diff_csv(matrix: &BenchmarkMatrix) -> Result<String> {
    let mut rows = vec![[
        "model",
        "regime",
        "ratio",
        "wall_time_seconds",
        "epochs",
        "rmse_diff",
        "mse_diff",
        "loss_diff",
        "mae_diff",
        "msle_diff",
        "r2s_diff",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()];
    for c in &matrix.cells {
        let Some(r) = &c.report else { continue };
        rows.push(vec![
            c.model.key().to_string(),
            c.regime.key().to_string(),
            num(c.test_ratio),
            num(r.wall_time_seconds),
            r.history.records.len().to_string(),
            num(r.diff.rmse_diff),
            num(r.diff.mse_diff),
            num(r.diff.loss_diff),
            num(r.diff.mae_diff),
            opt(r.diff.msle_diff),
            opt(r.diff.r2s_diff),
        ]);
    }
    csv_text(matrix, rows)
}

/// SVG line chart of train and validation MSE per epoch.
pub fn curve_svg(title: &str, history: &TrainingHistory, fingerprint: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let train: Vec<f64> = history.records.iter().map(|r| r.train.mse).collect();
    let val: Vec<f64> = history.records.iter().map(|r| r.validation.mse).collect();
    let hi = train.iter().chain(&val).copied().fold(f64::MIN, f64::max);
    let lo = train.iter().chain(&val).copied().fold(f64::MAX, f64::min);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = train.len().max(2) - 1;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / n as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / span;
    let points = |s: &[f64]| {
        s.iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(svg, "<!-- fingerprint={fingerprint} -->").unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<path d="M{PAD},{PAD} L{PAD},{b} L{r},{b}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">epoch (1 to {})</text>"#,
        W / 2.0,
        H - 15.0,
        train.len()
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{hi:.4}</text>"#,
        5, PAD
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{lo:.4}</text>"#,
        5,
        H - PAD
    )
    .unwrap();
    writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points(&train)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<polyline fill="none" stroke="darkorange" stroke-width="2" points="{}"/>"#,
        points(&val)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="45" fill="steelblue" font-family="sans-serif" font-size="12">train MSE</text>"#,
        W - 150.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="60" fill="darkorange" font-family="sans-serif" font-size="12">validation MSE</text>"#,
        W - 150.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn curve_file_name(kind: ModelKind, regime: RegimeId, ratio: f64) -> String {
    format!(
        "{}_{}_{}.svg",
        kind.key(),
        regime.key(),
        super::matrix::ratio_key(ratio)
    )
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes every report artifact into `out_dir`, creating it if needed.
pub fn render(matrix: &BenchmarkMatrix, out_dir: &Path) -> Result<RenderedFiles> {
    if matrix.cells.is_empty() {
        return Err(Error::invalid("cannot render an empty matrix"));
    }
    let charts_dir = out_dir.join(CURVES_DIR);
    fs::create_dir_all(&charts_dir).map_err(|e| Error::Io(format!("{}: {e}", charts_dir.display())))?;
    let files = RenderedFiles {
        overfit_table: out_dir.join(OVERFIT_TABLE_FILE),
        best_regime: out_dir.join(BEST_REGIME_FILE),
        curves: out_dir.join(CURVES_FILE),
        curve_charts: Vec::new(),
        time_vs_diff: out_dir.join(TIME_VS_DIFF_FILE),
        matrix: out_dir.join(MATRIX_FILE),
    };
    write(&files.overfit_table, &overfit_table_csv(matrix)?)?;
    write(&files.best_regime, &best_regime_csv(matrix)?)?;
    write(&files.curves, &curves_csv(matrix)?)?;
    write(&files.time_vs_diff, &time_vs_diff_csv(matrix)?)?;
    write(&files.matrix, &(matrix.to_json() + "\n"))?;
    let mut charts = Vec::new();
    for c in &matrix.cells {
        let Some(r) = &c.report else { continue };
        let path = charts_dir.join(curve_file_name(c.model, c.regime, c.test_ratio));
        let title = format!(
            "{} / {} / test {}",
            c.model.label(),
            c.regime.key(),
            percent(c.test_ratio)
        );
        write(&path, &curve_svg(&title, &r.history, &matrix.fingerprint))?;
        charts.push(path);
    }
    Ok(RenderedFiles {
        curve_charts: charts,
        ..files
    })
}

pub fn read_matrix(path: &Path) -> Result<BenchmarkMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    BenchmarkMatrix::from_json(&text)
}
