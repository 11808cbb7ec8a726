use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::frame::{ColumnData, SeriesFrame};
use super::schema::ColumnRole;

/// Descriptive statistics of one numeric column. `skewness` and `kurtosis` are `None`
/// for a constant column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std_dev: f64,
    pub skewness: Option<f64>,
    /// Excess kurtosis (0 for a normal distribution).
    pub kurtosis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub columns: Vec<ColumnStats>,
}

impl StatsTable {
    pub fn get(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// CSV with one row per column.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"));
        let mut out = String::from("column,n,mean,median,std_dev,skewness,kurtosis\n");
        for c in &self.columns {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4},{},{}\n",
                c.name,
                c.n,
                c.mean,
                c.median,
                c.std_dev,
                opt(c.skewness),
                opt(c.kurtosis)
            ));
        }
        out
    }
}

/// Statistics of a single sample; needs at least two values.
pub fn column_stats(name: &str, values: &[f64]) -> Result<ColumnStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Data(format!("column '{name}' needs at least 2 values, has {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std_dev = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let constant = values.iter().all(|&v| v == values[0]);
    let (skewness, kurtosis) = if constant || m2 == 0.0 {
        (None, None)
    } else {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(ColumnStats {
        name: name.to_string(),
        n,
        mean,
        median,
        std_dev: if constant { 0.0 } else { std_dev },
        skewness,
        kurtosis,
    })
}

/// Statistics of every numeric column except the timestamp.
pub fn describe(frame: &SeriesFrame) -> Result<StatsTable> {
    let mut columns = Vec::new();
    for (spec, col) in frame.schema().columns().iter().zip(frame.columns()) {
        if spec.role == ColumnRole::Timestamp || spec.one_hot_of.is_some() {
            continue;
        }
        if let ColumnData::Numeric(v) = col {
            columns.push(column_stats(&spec.name, v)?);
        }
    }
    Ok(StatsTable { columns })
}
