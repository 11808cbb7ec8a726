use proptest::prelude::*;
use pvreg::analysis::*;
use pvreg::data::{
    fit_scaler, make_windows, plan_splits, synthesize, ColumnData, ColumnRole, ColumnSpec, Schema, SeriesFrame,
    SynthConfig, WindowSet,
};
use pvreg::error::Result;
use pvreg::metrics::{Metric, MetricSet};
use pvreg::models::ModelKind;
use pvreg::regularization::RegimeId;
use pvreg::training::{Clock, EpochRecord, TrainConfig, TrainingHistory};

/// Predicts the (scaled) target plus a fixed offset per partition, chosen by window source row.
struct Stub {
    boundary: usize,
    before: f64,
    after: f64,
}

impl Predictor<f64> for Stub {
    fn predict_windows(&self, set: &WindowSet<f64>) -> Result<Vec<f64>> {
        Ok(set
            .targets
            .iter()
            .zip(&set.source)
            .map(|(t, &s)| t + if s < self.boundary { self.before } else { self.after })
            .collect())
    }
}

fn stub_setup() -> (pvreg::PartitionWindows, pvreg::data::Scaler, usize) {
    let n = 100;
    let schema = Schema::new(vec![ColumnSpec::new("y", ColumnRole::Target, "")]).unwrap();
    let y: Vec<f64> = (0..n).map(|i| 10.0 + (i as f64 * 0.7).sin() * 3.0).collect();
    let frame = SeriesFrame::new(schema, vec![ColumnData::Numeric(y)]).unwrap();
    let plan = plan_splits(n, 0.2).unwrap();
    let scaler = fit_scaler(&frame, &plan).unwrap();
    let w = make_windows(&scaler.apply(&frame).unwrap(), &plan, 3, 1).unwrap();
    (w, scaler, plan.val().start)
}

#[test]
fn perfect_model_has_zero_errors_and_no_flags() {
    let (w, scaler, b) = stub_setup();
    let e = evaluate(
        &Stub {
            boundary: b,
            before: 0.0,
            after: 0.0,
        },
        &w,
        &scaler,
        Default::default(),
    )
    .unwrap();
    for m in [Metric::Rmse, Metric::Mse, Metric::Huber, Metric::Mae, Metric::Msle] {
        assert!(m.of(&e.train).unwrap().abs() < 1e-12 && m.of(&e.test).unwrap().abs() < 1e-12);
        assert!(m.of_diff(&e.diff).unwrap().abs() < 1e-12);
    }
    assert!((e.train.r2.unwrap() - 1.0).abs() < 1e-12 && (e.test.r2.unwrap() - 1.0).abs() < 1e-12);
    let flags = detect_overfit(&e.train, &e.test, None, &OverfitCriterion::default()).unwrap();
    assert!(!flags.any());
}

#[test]
fn diff_from_stubbed_errors() {
    let (w, scaler, b) = stub_setup();
    let s = scaler.target_std();
    // errors of 1 unit on train and sqrt(1.5) units on test, in original units
    let stub = Stub {
        boundary: b,
        before: 1.0 / s,
        after: 1.5f64.sqrt() / s,
    };
    let e = evaluate(&stub, &w, &scaler, Default::default()).unwrap();
    assert!((e.train.mse - 1.0).abs() < 1e-9);
    assert!((e.diff.mse_diff - 0.5).abs() < 1e-9);
    let better = Stub {
        boundary: b,
        before: 2.0 / s,
        after: 1.0 / s,
    };
    let e = evaluate(&better, &w, &scaler, Default::default()).unwrap();
    assert!(e.diff.rmse_diff < 0.0 && e.diff.mse_diff < 0.0 && e.diff.mae_diff < 0.0 && e.diff.loss_diff < 0.0);
}

fn ms(v: f64, r2: f64) -> MetricSet {
    MetricSet {
        rmse: v.sqrt(),
        mse: v,
        huber: v / 2.0,
        mae: v,
        msle: Some(v / 10.0),
        r2: Some(r2),
    }
}

#[test]
fn relative_gap_flags() {
    let c = OverfitCriterion::RelativeGap { tau: 0.1, eps: 1e-9 };
    let f = detect_overfit(&ms(1.0, 0.9), &ms(1.5, 0.7), None, &c).unwrap();
    assert_eq!(f.mse, Some(true));
    assert_eq!(f.r2, Some(true));
    let same = detect_overfit(
        &ms(1.0, 0.9),
        &ms(1.0, 0.9),
        None,
        &OverfitCriterion::RelativeGap { tau: 1e-12, eps: 1e-9 },
    )
    .unwrap();
    assert!(!same.any());
    let undefined = MetricSet {
        msle: None,
        ..ms(1.0, 0.9)
    };
    assert_eq!(detect_overfit(&undefined, &ms(1.0, 0.9), None, &c).unwrap().msle, None);
    assert!(detect_overfit(
        &ms(1.0, 0.9),
        &ms(1.0, 0.9),
        None,
        &OverfitCriterion::RelativeGap { tau: 0.0, eps: 1e-9 }
    )
    .is_err());
}

proptest! {
    #[test]
    fn raising_tau_never_adds_flags(a in 0.01f64..10.0, b in 0.01f64..10.0, r1 in -1.0f64..1.0, r2 in -1.0f64..1.0, t1 in 0.001f64..2.0, dt in 0.0f64..2.0) {
        let low = detect_overfit(&ms(a, r1), &ms(b, r2), None, &OverfitCriterion::RelativeGap { tau: t1, eps: 1e-9 }).unwrap();
        let high = detect_overfit(&ms(a, r1), &ms(b, r2), None, &OverfitCriterion::RelativeGap { tau: t1 + dt, eps: 1e-9 }).unwrap();
        for m in Metric::ALL {
            prop_assert!(!(high.get(m) == Some(true) && low.get(m) != Some(true)));
        }
    }

    #[test]
    fn best_regime_survives_monotone_transforms(gaps in prop::collection::vec(-5.0f64..5.0, 4), tests in prop::collection::vec(0.0f64..5.0, 4)) {
        let cands: Vec<RegimeCandidate> = RegimeId::REGULARIZED.iter().zip(gaps.iter().zip(&tests))
            .map(|(&regime, (&gap, &test))| RegimeCandidate { regime, gap, test }).collect();
        let base = choose_regime(&cands, Metric::Rmse).unwrap();
        for f in [|g: f64| g.exp(), |g: f64| 3.0 * g - 7.0, |g: f64| g * g * g] {
            let moved: Vec<RegimeCandidate> = cands.iter().map(|c| RegimeCandidate { gap: f(c.gap), ..*c }).collect();
            prop_assert_eq!(choose_regime(&moved, Metric::Rmse).unwrap(), base);
        }
    }
}

fn history(pairs: &[(f64, f64)]) -> TrainingHistory {
    let records: Vec<EpochRecord> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(t, v))| EpochRecord {
            epoch: i + 1,
            train: ms(t, 1.0 - t),
            validation: ms(v, 1.0 - v),
            penalty: 0.0,
            wall_time_seconds: 1.0,
        })
        .collect();
    TrainingHistory {
        best_epoch: records.len(),
        stopped_early: false,
        total_wall_time: records.len() as f64,
        records,
    }
}

#[test]
fn divergence_mode() {
    let c = OverfitCriterion::Divergence { k: 2 };
    let both_fall = history(&[(5.0, 6.0), (4.0, 5.0), (3.0, 4.0), (2.0, 3.0)]);
    let f = detect_overfit(&ms(1.0, 0.9), &ms(9.0, 0.1), Some(&both_fall), &c).unwrap();
    assert!(!f.any());
    let split = history(&[(5.0, 6.0), (4.0, 5.0), (3.0, 5.5), (2.0, 6.0)]);
    let f = detect_overfit(&ms(1.0, 0.9), &ms(1.0, 0.9), Some(&split), &c).unwrap();
    assert_eq!(f.mse, Some(true));
    assert_eq!(f.r2, Some(true));
    assert_eq!(
        detect_overfit(
            &ms(1.0, 0.9),
            &ms(1.0, 0.9),
            Some(&split),
            &OverfitCriterion::Divergence { k: 3 }
        )
        .unwrap()
        .mse,
        Some(false)
    );
    assert!(detect_overfit(&ms(1.0, 0.9), &ms(1.0, 0.9), None, &c).is_err());
}

fn stub_report(kind: ModelKind, regime: RegimeId, ratio: f64, gap: f64, test: f64) -> CellResult {
    let train = ms(test - gap, 0.5);
    let test_set = ms(test, 0.5);
    let eval = Evaluation {
        train,
        test: test_set,
        diff: pvreg::metrics::metric_diff(&test_set, &train),
    };
    let report = EvaluationReport::new(
        kind,
        regime,
        ratio,
        eval,
        history(&[(1.0, 1.0)]),
        &OverfitCriterion::default(),
    )
    .unwrap();
    CellResult {
        model: kind,
        regime,
        test_ratio: ratio,
        seed: 0,
        report: Some(report),
        error: None,
    }
}

fn stub_matrix(rows: &[(f64, [f64; 4], [f64; 4])]) -> BenchmarkMatrix {
    let mut cells = Vec::new();
    for (ratio, gaps, tests) in rows {
        for (i, regime) in RegimeId::REGULARIZED.iter().enumerate() {
            cells.push(stub_report(ModelKind::Dnn, *regime, *ratio, gaps[i], tests[i]));
        }
    }
    BenchmarkMatrix {
        fingerprint: "stub".into(),
        base_seed: 0,
        criterion: OverfitCriterion::default(),
        cells,
    }
}

#[test]
fn best_regime_argmin_and_ties() {
    let m = stub_matrix(&[(0.1, [0.5, 0.4, 0.1, 0.2], [2.0; 4])]);
    assert_eq!(best_regime(&m, ModelKind::Dnn, 0.1, Metric::Mse).unwrap(), RegimeId::R3);
    let tied = stub_matrix(&[(0.1, [0.3; 4], [1.0, 0.9, 0.95, 1.2])]);
    assert_eq!(
        best_regime(&tied, ModelKind::Dnn, 0.1, Metric::Mse).unwrap(),
        RegimeId::R2
    );
    let all_equal = stub_matrix(&[(0.1, [0.3; 4], [1.0; 4])]);
    assert_eq!(
        best_regime(&all_equal, ModelKind::Dnn, 0.1, Metric::Mse).unwrap(),
        RegimeId::R1
    );
    assert!(matches!(
        best_regime(&m, ModelKind::Dnn, 0.3, Metric::Mse),
        Err(pvreg::Error::MissingCells(_))
    ));
}

#[test]
fn best_regime_table_follows_ratio_pattern() {
    let m = stub_matrix(&[
        (0.1, [0.5, 0.4, 0.1, 0.2], [2.0; 4]),
        (0.5, [0.5, 0.4, 0.3, 0.05], [2.0; 4]),
    ]);
    let table = best_regime_table(&m);
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].choices[&Metric::Mse], Some(RegimeId::R3));
    assert_eq!(table.rows[1].choices[&Metric::Mse], Some(RegimeId::R4));
    let csv = best_regime_csv(&m).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# fingerprint=stub"));
    assert_eq!(lines[2], "DNN,10%,R3,R3,R3,R3,R3,R1");
    assert_eq!(lines[3], "DNN,50%,R4,R4,R4,R4,R4,R1");
}

#[test]
fn overfit_cell_lists_flagged_ratios() {
    let mut cells = Vec::new();
    for (ratio, gap) in [(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)] {
        cells.push(stub_report(ModelKind::Cnn, RegimeId::B1, ratio, gap, 2.0));
    }
    let m = BenchmarkMatrix {
        fingerprint: "f".into(),
        base_seed: 0,
        criterion: OverfitCriterion::default(),
        cells,
    };
    let csv = overfit_table_csv(&m).unwrap();
    let mut rows = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(csv.as_bytes());
    let row = rows.records().next().unwrap().unwrap();
    assert_eq!(&row[0], "CNN");
    assert_eq!(&row[1], "B1");
    assert_eq!(&row[3], "10%, 30%");
}

fn frame() -> SeriesFrame {
    synthesize(&SynthConfig::new(21, 400)).unwrap()
}

fn bench_cfg() -> BenchConfig {
    let mut cfg = BenchConfig {
        lookback: 4,
        train: TrainConfig {
            max_epochs: 2,
            clock: Clock::Logical,
            ..TrainConfig::default()
        },
        base_seed: 9,
        ..BenchConfig::default()
    };
    cfg.hidden.insert(ModelKind::Dnn, vec![8, 4]);
    cfg.hidden.insert(ModelKind::RnnLstm, vec![4]);
    cfg
}

#[test]
fn one_cell_matrix_renders_every_artifact() {
    let req = MatrixRequest {
        kinds: vec![ModelKind::Dnn],
        regimes: vec![RegimeId::B1],
        ratios: vec![0.1],
    };
    let m = run_matrix::<f64>(&req, &frame(), &bench_cfg(), 1).unwrap();
    assert_eq!(m.cells.len(), 1);
    assert!(m.cells[0].error.is_none(), "{:?}", m.cells[0].error);
    let dir = tempfile::tempdir().unwrap();
    let files = render(&m, dir.path()).unwrap();
    let data_rows = |p: &std::path::Path| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count()
            - 1
    };
    assert_eq!(data_rows(&files.overfit_table), 1);
    assert_eq!(data_rows(&files.best_regime), 1);
    assert_eq!(data_rows(&files.time_vs_diff), 1);
    assert_eq!(data_rows(&files.curves), 2);
    assert_eq!(files.curve_charts.len(), 1);
    let svg = std::fs::read_to_string(&files.curve_charts[0]).unwrap();
    assert!(svg.contains(&format!("fingerprint={}", m.fingerprint)) && svg.contains("<polyline"));
    assert_eq!(read_matrix(&files.matrix).unwrap(), m);
}

#[test]
fn matrix_is_deterministic_across_workers() {
    let req = MatrixRequest {
        kinds: vec![ModelKind::Dnn, ModelKind::RnnLstm],
        regimes: vec![RegimeId::B1, RegimeId::R4],
        ratios: vec![0.1, 0.3],
    };
    let f = frame();
    let one = run_matrix::<f64>(&req, &f, &bench_cfg(), 1).unwrap();
    let four = run_matrix::<f64>(&req, &f, &bench_cfg(), 4).unwrap();
    assert_eq!(one.cells.len(), 8);
    assert_eq!(one, four);
    assert_eq!(one.to_json(), four.to_json());
    let again = run_matrix::<f64>(&req, &f, &bench_cfg(), 2).unwrap();
    assert_eq!(again, one);
    let keys: Vec<(ModelKind, RegimeId, u64)> = one
        .cells
        .iter()
        .map(|c| (c.model, c.regime, ratio_key(c.test_ratio)))
        .collect();
    let mut requested = Vec::new();
    for &k in &req.kinds {
        for &r in &req.regimes {
            for &t in &req.ratios {
                requested.push((k, r, ratio_key(t)));
            }
        }
    }
    assert_eq!(keys, requested);
}

#[test]
fn failing_cells_are_recorded() {
    let req = MatrixRequest {
        kinds: vec![ModelKind::Dnn, ModelKind::Autoencoder],
        regimes: vec![RegimeId::B1],
        ratios: vec![0.1],
    };
    let mut cfg = bench_cfg();
    // three hidden sizes is invalid for the autoencoder, so only that cell fails
    cfg.hidden.insert(ModelKind::Autoencoder, vec![4, 3, 2]);
    let m = run_matrix::<f64>(&req, &frame(), &cfg, 2).unwrap();
    assert!(m.cells[0].report.is_some());
    assert!(m.cells[1].report.is_none() && m.cells[1].error.is_some());
    assert_eq!(m.failures().count(), 1);
}

#[test]
fn shuffled_mode_runs() {
    let req = MatrixRequest {
        kinds: vec![ModelKind::Dnn],
        regimes: vec![RegimeId::R1],
        ratios: vec![0.2],
    };
    let cfg = BenchConfig {
        shuffled: true,
        ..bench_cfg()
    };
    let m = run_matrix::<f64>(&req, &frame(), &cfg, 1).unwrap();
    assert!(m.cells[0].report.is_some());
    assert_ne!(
        m.fingerprint,
        run_matrix::<f64>(&req, &frame(), &bench_cfg(), 1).unwrap().fingerprint
    );
}

#[test]
fn percent_format() {
    assert_eq!(percent(0.1), "10%");
    assert_eq!(percent(0.3), "30%");
    assert_eq!(percent(0.125), "12.5%");
}
