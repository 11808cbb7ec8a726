use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The smallest series `plan_splits` accepts.
pub const MIN_SPLIT_ROWS: usize = 10;

/// The five test fractions of the benchmark grid.
pub const TEST_RATIOS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

/// Chronological partition of `n_total` rows into train, validation and test blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_ratio: f64,
    pub n_total: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl SplitPlan {
    pub fn train(&self) -> Range<usize> {
        0..self.n_train
    }

    pub fn val(&self) -> Range<usize> {
        self.n_train..self.n_train + self.n_val
    }

    pub fn test(&self) -> Range<usize> {
        self.n_train + self.n_val..self.n_total
    }

    pub fn ranges(&self) -> [Range<usize>; 3] {
        [self.train(), self.val(), self.test()]
    }
}

const RATIO_SCALE: u128 = 1_000_000_000;

/// `round_half_up(n * r)` with `r` taken to nine decimal places, computed in integers so
/// exact halves such as 0.5 * 21045 always round up.
fn scaled_round(n: usize, r_scaled: u128) -> usize {
    let num = n as u128 * r_scaled;
    ((2 * num + RATIO_SCALE) / (2 * RATIO_SCALE)) as usize
}

/// Test rows are `round_half_up(n·r)`, validation rows `round_half_up((n − test)·r)`, and
/// the remainder trains; blocks are assigned earliest-first as train, validation, test.
pub fn plan_splits(n_total: usize, r: f64) -> Result<SplitPlan> {
    if !(r > 0.0 && r <= 0.5) {
        return Err(Error::invalid(format!("test ratio {r} outside (0, 0.5]")));
    }
    if n_total < MIN_SPLIT_ROWS {
        return Err(Error::invalid(format!(
            "{n_total} rows, need at least {MIN_SPLIT_ROWS}"
        )));
    }
    let r_scaled = (r * RATIO_SCALE as f64).round() as u128;
    let n_test = scaled_round(n_total, r_scaled);
    let n_val = scaled_round(n_total - n_test, r_scaled);
    Ok(SplitPlan {
        test_ratio: r,
        n_total,
        n_train: n_total - n_test - n_val,
        n_val,
        n_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let p = plan_splits(10, 0.5).unwrap();
        assert_eq!((p.n_train, p.n_val, p.n_test), (2, 3, 5));
        let p = plan_splits(15, 0.1).unwrap();
        // 1.5 rounds up, then 13.5 * 0.1 = 1.35 rounds down
        assert_eq!((p.n_train, p.n_val, p.n_test), (12, 1, 2));
        assert!(plan_splits(100, 0.0).is_err());
        assert!(plan_splits(100, 0.51).is_err());
        assert!(plan_splits(100, f64::NAN).is_err());
        assert!(plan_splits(9, 0.2).is_err());
    }

    #[test]
    fn ranges_are_contiguous() {
        let p = plan_splits(101, 0.3).unwrap();
        let [a, b, c] = p.ranges();
        assert_eq!((a.start, a.end, b.end, c.end), (0, b.start, c.start, 101));
    }
}
