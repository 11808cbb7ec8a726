use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::frame::{ColumnData, SeriesFrame};
use super::schema::ColumnRole;
use super::split::SplitPlan;

/// How one column is transformed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnScaling {
    /// `(x - mean) / std`
    ZScore { mean: f64, std: f64 },
    /// Constant over the training rows; left unscaled.
    Constant,
    /// One-hot indicators, timestamps and categorical columns are never scaled.
    Skip,
}

/// Per-column z-score statistics fit on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    names: Vec<String>,
    scaling: Vec<ColumnScaling>,
    target: usize,
}

impl Scaler {
    /// Fits on the rows yielded by `rows`.
    pub fn fit_rows(frame: &SeriesFrame, rows: impl Iterator<Item = usize> + Clone) -> Result<Self> {
        let count = rows.clone().count();
        if count == 0 {
            return Err(Error::Data("scaler needs at least one training row".into()));
        }
        let mut scaling = Vec::with_capacity(frame.columns().len());
        for (spec, col) in frame.schema().columns().iter().zip(frame.columns()) {
            let values = match col {
                ColumnData::Numeric(v) if spec.one_hot_of.is_none() && spec.role != ColumnRole::Timestamp => v,
                _ => {
                    scaling.push(ColumnScaling::Skip);
                    continue;
                }
            };
            let nf = count as f64;
            let mean = rows.clone().map(|i| values[i]).sum::<f64>() / nf;
            let var = rows.clone().map(|i| (values[i] - mean).powi(2)).sum::<f64>() / nf;
            let first = values[rows.clone().next().expect("non-empty")];
            let constant = rows.clone().all(|i| values[i] == first);
            scaling.push(if constant || var.sqrt() == 0.0 {
                ColumnScaling::Constant
            } else {
                ColumnScaling::ZScore { mean, std: var.sqrt() }
            });
        }
        let target = frame.schema().target_index();
        if scaling[target] == ColumnScaling::Constant {
            return Err(Error::Data(format!(
                "target column '{}' is constant over the training rows",
                frame.schema().target().name
            )));
        }
        Ok(Self {
            names: frame.schema().columns().iter().map(|c| c.name.clone()).collect(),
            scaling,
            target,
        })
    }

    pub fn scaling(&self, name: &str) -> Option<ColumnScaling> {
        self.names.iter().position(|n| n == name).map(|i| self.scaling[i])
    }

    /// Names of columns left unscaled because they were constant over the training rows.
    pub fn constant_columns(&self) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.scaling)
            .filter(|(_, s)| **s == ColumnScaling::Constant)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    fn target_stats(&self) -> (f64, f64) {
        match self.scaling[self.target] {
            ColumnScaling::ZScore { mean, std } => (mean, std),
            _ => unreachable!("target is always z-scored"),
        }
    }

    /// Maps a scaled target value back to original units.
    pub fn inverse_target(&self, scaled: f64) -> f64 {
        let (mean, std) = self.target_stats();
        scaled * std + mean
    }

    pub fn scale_target(&self, value: f64) -> f64 {
        let (mean, std) = self.target_stats();
        (value - mean) / std
    }

    pub fn target_std(&self) -> f64 {
        self.target_stats().1
    }

    pub fn apply(&self, frame: &SeriesFrame) -> Result<SeriesFrame> {
        self.transform(frame, |x, mean, std| (x - mean) / std)
    }

    pub fn invert(&self, frame: &SeriesFrame) -> Result<SeriesFrame> {
        self.transform(frame, |x, mean, std| x * std + mean)
    }

    fn transform(&self, frame: &SeriesFrame, f: impl Fn(f64, f64, f64) -> f64) -> Result<SeriesFrame> {
        let names: Vec<&str> = frame.schema().columns().iter().map(|c| c.name.as_str()).collect();
        if names != self.names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Data(
                "frame columns differ from the columns the scaler was fit on".into(),
            ));
        }
        let columns = frame
            .columns()
            .iter()
            .zip(&self.scaling)
            .map(|(col, s)| match (col, s) {
                (ColumnData::Numeric(v), ColumnScaling::ZScore { mean, std }) => {
                    ColumnData::Numeric(v.iter().map(|&x| f(x, *mean, *std)).collect())
                }
                _ => col.clone(),
            })
            .collect();
        Ok(frame.with_columns(frame.schema().clone(), columns))
    }
}

/// Fits a scaler on the plan's training rows.
pub fn fit_scaler(frame: &SeriesFrame, plan: &SplitPlan) -> Result<Scaler> {
    if plan.n_total != frame.n() {
        return Err(Error::Data(format!(
            "plan covers {} rows, frame has {}",
            plan.n_total,
            frame.n()
        )));
    }
    Scaler::fit_rows(frame, plan.train())
}

pub fn apply_scaler(frame: &SeriesFrame, scaler: &Scaler) -> Result<SeriesFrame> {
    scaler.apply(frame)
}
