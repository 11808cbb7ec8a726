//! Dataset ingestion, descriptive statistics, chronological splits, scaling, windowing and
//! a synthetic PV series generator.

mod frame;
mod scaler;
mod schema;
mod split;
mod stats;
mod synth;
mod window;

pub use frame::{encode_categoricals, load_csv, read_csv, ColumnData, SeriesFrame};
pub use scaler::{apply_scaler, fit_scaler, ColumnScaling, Scaler};
pub use schema::{ColumnRole, ColumnSpec, Schema};
pub use split::{plan_splits, SplitPlan, MIN_SPLIT_ROWS, TEST_RATIOS};
pub use stats::{column_stats, describe, ColumnStats, StatsTable};
pub use synth::{location_name, synth_schema, synthesize, SynthConfig, DEFAULT_LOCATIONS, MIN_SYNTH_ROWS};
pub use window::{make_windows, shuffled_windows, PartitionWindows, WindowSet, DEFAULT_HORIZON, DEFAULT_LOOKBACK};
