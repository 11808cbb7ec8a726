//! Evaluation in original units, overfitting flags, best-regime selection, the benchmark
//! grid runner and report rendering.

mod evaluate;
mod fixture;
mod matrix;
mod render;

pub use evaluate::{
    detect_overfit, evaluate, gap, Evaluation, EvaluationReport, OverfitCriterion, OverfitFlags, Predictor,
    DEFAULT_DIVERGENCE_RUN, DEFAULT_GAP_EPSILON, DEFAULT_TAU,
};
pub use fixture::{weight_sparsity, FixtureRun, OverfitFixture, SPARSITY_THRESHOLD};
pub use matrix::{
    best_regime, best_regime_table, cell_seed, choose_regime, fingerprint, prepare_split, ratio_key, run_cell,
    run_matrix, train_cell, BenchConfig, BenchmarkMatrix, BestRegimeRow, BestRegimeTable, CellResult, MatrixRequest,
    PreparedSplit, RegimeCandidate,
};
pub use render::{
    best_regime_csv, curve_file_name, curve_svg, curves_csv, overfit_table_csv, percent, read_matrix, render,
    time_vs_diff_csv, RenderedFiles, BEST_REGIME_FILE, CURVES_DIR, CURVES_FILE, MATRIX_FILE, OVERFIT_TABLE_FILE,
    TIME_VS_DIFF_FILE,
};
