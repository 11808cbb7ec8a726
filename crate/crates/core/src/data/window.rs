use std::ops::Range;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::frame::{ColumnData, SeriesFrame};
use super::split::{plan_splits, SplitPlan};

pub const DEFAULT_LOOKBACK: usize = 24;
pub const DEFAULT_HORIZON: usize = 1;

/// Supervised samples cut from one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet<T> {
    /// `[count × lookback × features]`
    pub inputs: Tensor<T>,
    pub targets: Vec<T>,
    /// Frame row of each window's first input step.
    pub source: Vec<usize>,
}

impl<T: Scalar> WindowSet<T> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn lookback(&self) -> usize {
        self.inputs.shape()[1]
    }

    pub fn features(&self) -> usize {
        self.inputs.shape()[2]
    }

    /// Gathers the listed windows into a batch: inputs `[k × lookback × features]` and targets `[k × 1]`.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Tensor<T>)> {
        let per = self.lookback() * self.features();
        let mut x = Vec::with_capacity(indices.len() * per);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("window {i} of {}", self.len())));
            }
            x.extend_from_slice(&self.inputs.data()[i * per..(i + 1) * per]);
            y.push(self.targets[i]);
        }
        Ok((
            Tensor::from_vec(&[indices.len(), self.lookback(), self.features()], x)?,
            Tensor::from_vec(&[indices.len(), 1], y)?,
        ))
    }

    pub fn targets_tensor(&self) -> Result<Tensor<T>> {
        Tensor::from_vec(&[self.len(), 1], self.targets.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionWindows<T> {
    pub train: WindowSet<T>,
    pub val: WindowSet<T>,
    pub test: WindowSet<T>,
}

/// Model input columns (target included) as row-major values, plus the target column.
fn input_matrix(frame: &SeriesFrame) -> Result<(Vec<&[f64]>, &[f64])> {
    let mut cols = Vec::new();
    for i in frame.schema().input_indices() {
        match &frame.columns()[i] {
            ColumnData::Numeric(v) => cols.push(v.as_slice()),
            ColumnData::Categorical(_) => unreachable!("model inputs are numeric"),
        }
    }
    if frame.columns().iter().any(|c| matches!(c, ColumnData::Categorical(_))) {
        return Err(Error::Data("encode categorical columns before windowing".into()));
    }
    Ok((cols, frame.target()))
}

/// Windows starting at each `start`, reading rows `[start, start + lookback)` and labelled
/// with the target at `start + lookback + horizon - 1`.
fn cut<T: Scalar>(
    cols: &[&[f64]],
    target: &[f64],
    starts: &[usize],
    lookback: usize,
    horizon: usize,
) -> Result<WindowSet<T>> {
    let f = cols.len();
    let mut inputs = Vec::with_capacity(starts.len() * lookback * f);
    let mut targets = Vec::with_capacity(starts.len());
    for &s in starts {
        for row in s..s + lookback {
            inputs.extend(cols.iter().map(|c| T::lit(c[row])));
        }
        targets.push(T::lit(target[s + lookback + horizon - 1]));
    }
    let inputs = if starts.is_empty() {
        Tensor::zeros(&[0, lookback, f])
    } else {
        Tensor::from_vec(&[starts.len(), lookback, f], inputs)?
    };
    Ok(WindowSet {
        inputs,
        targets,
        source: starts.to_vec(),
    })
}

fn window_starts(range: &Range<usize>, lookback: usize, horizon: usize, name: &str) -> Result<Vec<usize>> {
    let span = lookback + horizon - 1;
    if range.len() <= span {
        return Err(Error::Data(format!(
            "{name} partition has {} rows, needs more than {span} for lookback {lookback} and horizon {horizon}",
            range.len()
        )));
    }
    Ok((range.start..range.end - span).collect())
}

fn check_window(lookback: usize, horizon: usize) -> Result<()> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::invalid("lookback and horizon must be at least 1"));
    }
    Ok(())
}

/// Cuts windows inside each partition of `plan`; no window crosses a partition boundary.
pub fn make_windows<T: Scalar>(
    frame: &SeriesFrame,
    plan: &SplitPlan,
    lookback: usize,
    horizon: usize,
) -> Result<PartitionWindows<T>> {
    check_window(lookback, horizon)?;
    if plan.n_total != frame.n() {
        return Err(Error::Data(format!(
            "plan covers {} rows, frame has {}",
            plan.n_total,
            frame.n()
        )));
    }
    let (cols, target) = input_matrix(frame)?;
    let [tr, va, te] = plan.ranges();
    Ok(PartitionWindows {
        train: cut(
            &cols,
            target,
            &window_starts(&tr, lookback, horizon, "train")?,
            lookback,
            horizon,
        )?,
        val: cut(
            &cols,
            target,
            &window_starts(&va, lookback, horizon, "validation")?,
            lookback,
            horizon,
        )?,
        test: cut(
            &cols,
            target,
            &window_starts(&te, lookback, horizon, "test")?,
            lookback,
            horizon,
        )?,
    })
}

/// Alternative to chronological splitting: every window of the whole series is cut,
/// shuffled with `seed`, and dealt to partitions using `plan_splits(window_count, r)`.
/// Returns the windows and the frame rows touched by training windows (for fitting a scaler).
pub fn shuffled_windows<T: Scalar>(
    frame: &SeriesFrame,
    r: f64,
    lookback: usize,
    horizon: usize,
    seed: u64,
) -> Result<(PartitionWindows<T>, Vec<usize>)> {
    check_window(lookback, horizon)?;
    let (cols, target) = input_matrix(frame)?;
    let mut starts = window_starts(&(0..frame.n()), lookback, horizon, "full")?;
    SeededRng::new(seed, 0x5ef1).shuffle(&mut starts);
    let plan = plan_splits(starts.len(), r)?;
    let [tr, va, te] = plan.ranges();
    let mut train_starts = starts[tr].to_vec();
    let mut val_starts = starts[va].to_vec();
    let mut test_starts = starts[te].to_vec();
    for s in [&mut train_starts, &mut val_starts, &mut test_starts] {
        s.sort_unstable();
    }
    let mut rows = vec![false; frame.n()];
    for &s in &train_starts {
        rows[s..s + lookback].iter_mut().for_each(|r| *r = true);
    }
    let rows = (0..frame.n()).filter(|&i| rows[i]).collect();
    Ok((
        PartitionWindows {
            train: cut(&cols, target, &train_starts, lookback, horizon)?,
            val: cut(&cols, target, &val_starts, lookback, horizon)?,
            test: cut(&cols, target, &test_starts, lookback, horizon)?,
        },
        rows,
    ))
}
