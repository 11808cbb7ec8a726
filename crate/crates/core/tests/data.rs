use std::io::Write;

use proptest::prelude::*;
use pvreg::data::*;
use pvreg::rng::SeededRng;

fn small_schema() -> Schema {
    Schema::from_toml_str(
        r#"
[[column]]
name = "t"
role = "timestamp"

[[column]]
name = "temp"
role = "numeric"
units = "C"

[[column]]
name = "season"
role = "categorical"
categories = ["winter", "spring", "summer", "autumn"]

[[column]]
name = "power"
role = "target"
units = "W"
"#,
    )
    .unwrap()
}

fn load(text: &str) -> pvreg::error::Result<SeriesFrame> {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    load_csv(f.path(), &small_schema())
}

#[test]
fn three_row_fixture_is_sorted_by_timestamp() {
    let frame = load("t,temp,season,power\n3,30.5,summer,9\n1,10,winter,1.5\n2,20,spring,4\n").unwrap();
    assert_eq!(frame.n(), 3);
    assert_eq!(frame.dropped_rows(), 0);
    assert_eq!(frame.numeric("t").unwrap(), &[1.0, 2.0, 3.0]);
    assert_eq!(frame.numeric("temp").unwrap(), &[10.0, 20.0, 30.5]);
    assert_eq!(frame.target(), &[1.5, 4.0, 9.0]);
    match frame.column("season").unwrap() {
        ColumnData::Categorical(v) => assert_eq!(v, &["winter", "spring", "summer"]),
        _ => panic!("season should stay categorical"),
    }
}

#[test]
fn header_order_may_differ() {
    let frame = load("power,season,temp,t\n1,winter,5,1\n").unwrap();
    assert_eq!(frame.numeric("temp").unwrap(), &[5.0]);
}

#[test]
fn malformed_rows_are_dropped_and_counted() {
    let frame = load("t,temp,season,power\n1,10,winter,1\n2,abc,spring,2\n3,30,summer,3\n").unwrap();
    assert_eq!((frame.n(), frame.dropped_rows()), (2, 1));
    let frame = load("t,temp,season,power\n1,,winter,1\n2,5,monsoon,2\n3,30,summer,3\n4,1\n").unwrap();
    assert_eq!((frame.n(), frame.dropped_rows()), (1, 3));
}

#[test]
fn load_errors() {
    assert!(load("t,temp,season,watts\n1,2,winter,3\n").is_err());
    assert!(load("t,temp,season,power,extra\n1,2,winter,3,4\n").is_err());
    assert!(load("t,temp,season,power\nx,y,z,w\n").is_err());
    assert!(load_csv(std::path::Path::new("/nonexistent/file.csv"), &small_schema()).is_err());
}

#[test]
fn ignored_columns_are_not_kept() {
    let schema =
        Schema::from_toml_str("[[column]]\nname='note'\nrole='ignore'\n[[column]]\nname='y'\nrole='target'\n").unwrap();
    let frame = read_csv("note,y\nhello,1\n,2\n".as_bytes(), &schema).unwrap();
    assert_eq!(frame.schema().len(), 1);
    assert_eq!(frame.target(), &[1.0, 2.0]);
}

#[test]
fn describe_small_columns() {
    let s = column_stats("x", &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!((s.mean, s.median), (2.5, 2.5));
    assert!((s.std_dev - 1.290_994_448_735_805_6).abs() < 1e-12);
    assert_eq!(s.skewness, Some(0.0));
    assert!((s.kurtosis.unwrap() + 1.36).abs() < 1e-12);
    let c = column_stats("c", &[7.0; 5]).unwrap();
    assert_eq!((c.std_dev, c.skewness, c.kurtosis), (0.0, None, None));
    assert_eq!(column_stats("odd", &[3.0, 1.0, 2.0]).unwrap().median, 2.0);
    assert!(column_stats("one", &[1.0]).is_err());
}

/// Brute-force statistics written independently of the library: moments from explicit
/// power sums and the median by selection.
fn oracle(values: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let central = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let std = (central(2) * n / (n - 1.0)).sqrt();
    let skew = central(3) / central(2).powf(1.5);
    let kurt = central(4) / central(2).powi(2) - 3.0;
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = s.len();
    let median = if m.is_multiple_of(2) {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    } else {
        s[m / 2]
    };
    (mean, median, std, skew, kurt)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

#[test]
fn describe_matches_brute_force_oracle() {
    let mut rng = SeededRng::new(77, 0);
    for case in 0..50 {
        let n = 2 + rng.below(300);
        let scale = 10f64.powi(rng.below(5) as i32 - 2);
        let values: Vec<f64> = (0..n)
            .map(|_| scale * (rng.normal() + 0.5 * rng.uniform().powi(3)))
            .collect();
        let got = column_stats("x", &values).unwrap();
        let (mean, median, std, skew, kurt) = oracle(&values);
        for (a, b) in [
            (got.mean, mean),
            (got.median, median),
            (got.std_dev, std),
            (got.skewness.unwrap(), skew),
            (got.kurtosis.unwrap(), kurt),
        ] {
            assert!(rel(a, b) < 1e-10, "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn table_one_split_counts() {
    let expected = [
        (0.1, 17046, 1894, 2105),
        (0.2, 13469, 3367, 4209),
        (0.3, 10312, 4419, 6314),
        (0.4, 7576, 5051, 8418),
        (0.5, 5261, 5261, 10523),
    ];
    for (r, train, val, test) in expected {
        let p = plan_splits(21045, r).unwrap();
        assert_eq!((p.n_train, p.n_val, p.n_test), (train, val, test), "ratio {r}");
    }
}

proptest! {
    #[test]
    fn split_partitions_cover_rows(n in 10usize..5000, k in 1usize..=50) {
        let p = plan_splits(n, k as f64 / 100.0).unwrap();
        prop_assert_eq!(p.n_train + p.n_val + p.n_test, n);
        let [a, b, c] = p.ranges();
        prop_assert_eq!(a.end, b.start);
        prop_assert_eq!(b.end, c.start);
        prop_assert_eq!(c.end, n);
    }
}

fn numeric_frame(n: usize) -> SeriesFrame {
    let schema = Schema::new(vec![
        ColumnSpec::new("x", ColumnRole::Numeric, ""),
        ColumnSpec::new("y", ColumnRole::Target, ""),
    ])
    .unwrap();
    SeriesFrame::new(
        schema,
        vec![
            ColumnData::Numeric((0..n).map(|i| (i * i % 7) as f64).collect()),
            ColumnData::Numeric((0..n).map(|i| i as f64).collect()),
        ],
    )
    .unwrap()
}

#[test]
fn scaler_definition_and_round_trip() {
    let schema = Schema::new(vec![
        ColumnSpec::new("c", ColumnRole::Numeric, ""),
        ColumnSpec::new("y", ColumnRole::Target, ""),
    ])
    .unwrap();
    // training rows 3, 7 have mean 5 and (population) std 2
    let y: Vec<f64> = vec![3.0, 7.0, 3.0, 7.0, 3.0, 7.0, 3.0, 7.0, 100.0, 7.0];
    let frame = SeriesFrame::new(
        schema,
        vec![ColumnData::Numeric(vec![1.0; 10]), ColumnData::Numeric(y.clone())],
    )
    .unwrap();
    let plan = SplitPlan {
        test_ratio: 0.1,
        n_total: 10,
        n_train: 8,
        n_val: 1,
        n_test: 1,
    };
    let scaler = fit_scaler(&frame, &plan).unwrap();
    assert_eq!(scaler.scale_target(7.0), 1.0);
    assert_eq!(scaler.constant_columns(), vec!["c"]);
    let scaled = apply_scaler(&frame, &scaler).unwrap();
    assert_eq!(scaled.numeric("c").unwrap(), &[1.0; 10]);
    let back = scaler.invert(&scaled).unwrap();
    for (a, b) in back.target().iter().zip(&y) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(scaler.inverse_target(1.0), 7.0);
}

#[test]
fn constant_target_is_rejected() {
    let schema = Schema::new(vec![ColumnSpec::new("y", ColumnRole::Target, "")]).unwrap();
    let frame = SeriesFrame::new(schema, vec![ColumnData::Numeric(vec![2.0; 20])]).unwrap();
    assert!(fit_scaler(&frame, &plan_splits(20, 0.2).unwrap()).is_err());
}

#[test]
fn scaler_ignores_test_rows() {
    let frame = numeric_frame(200);
    let plan = plan_splits(200, 0.3).unwrap();
    let base = fit_scaler(&frame, &plan).unwrap();
    let mut rng = SeededRng::new(5, 0);
    for _ in 0..10 {
        let mut cols = frame.columns().to_vec();
        for c in cols.iter_mut() {
            if let ColumnData::Numeric(v) = c {
                for x in &mut v[plan.val().start..plan.n_total] {
                    *x = 1e3 * rng.normal();
                }
            }
        }
        let mutated = SeriesFrame::new(frame.schema().clone(), cols).unwrap();
        assert_eq!(fit_scaler(&mutated, &plan).unwrap(), base);
    }
}

#[test]
fn one_hot_encoding() {
    let frame = load("t,temp,season,power\n1,10,spring,1\n2,11,autumn,2\n").unwrap();
    let enc = encode_categoricals(&frame).unwrap();
    let blocks: Vec<&[f64]> = ["winter", "spring", "summer", "autumn"]
        .iter()
        .map(|s| enc.numeric(&format!("season={s}")).unwrap())
        .collect();
    assert_eq!(
        blocks.iter().map(|b| b[0]).collect::<Vec<_>>(),
        vec![0.0, 1.0, 0.0, 0.0]
    );
    assert_eq!(
        blocks.iter().map(|b| b[1]).collect::<Vec<_>>(),
        vec![0.0, 0.0, 0.0, 1.0]
    );
    assert!(enc.column("season").is_none());

    let synth = synthesize(&SynthConfig::new(1, 200)).unwrap();
    let enc = encode_categoricals(&synth).unwrap();
    let location_cols = enc
        .schema()
        .columns()
        .iter()
        .filter(|c| c.one_hot_of.as_deref() == Some("Location"))
        .count();
    assert_eq!(location_cols, 12);
}

#[test]
fn unknown_category_is_an_error() {
    let schema = Schema::new(vec![
        ColumnSpec::categorical("season", &["winter", "spring", "summer", "autumn"]),
        ColumnSpec::new("y", ColumnRole::Target, ""),
    ])
    .unwrap();
    let frame = SeriesFrame::new(
        schema,
        vec![
            ColumnData::Categorical(vec!["monsoon".into()]),
            ColumnData::Numeric(vec![1.0]),
        ],
    )
    .unwrap();
    assert!(encode_categoricals(&frame).is_err());
}

#[test]
fn window_counts_and_labels() {
    // 10-row partitions: 30 rows split 10/10/10
    let frame = numeric_frame(30);
    let plan = SplitPlan {
        test_ratio: 1.0 / 3.0,
        n_total: 30,
        n_train: 10,
        n_val: 10,
        n_test: 10,
    };
    let w = make_windows::<f64>(&frame, &plan, 4, 1).unwrap();
    assert_eq!((w.train.len(), w.val.len(), w.test.len()), (6, 6, 6));
    assert_eq!(w.train.inputs.shape(), &[6, 4, 2]);
    assert_eq!(w.val.source, vec![10, 11, 12, 13, 14, 15]);
    // label of the window starting at row 10 is the target at row 10 + 4 + 1 - 1
    assert_eq!(w.val.targets[0], 14.0);

    let w1 = make_windows::<f64>(&frame, &plan, 1, 1).unwrap();
    assert_eq!(w1.train.len(), 9);
    assert_eq!(w1.train.inputs.data()[..2], [0.0, 0.0]);
    assert_eq!(w1.train.targets[0], 1.0);

    let short = plan_splits(15, 0.2).unwrap();
    assert!(make_windows::<f64>(&numeric_frame(15), &short, 10, 1).is_err());
}

#[test]
fn windows_never_cross_partitions() {
    for n in 10..60 {
        for k in 1..=5 {
            let plan = plan_splits(n, k as f64 / 10.0).unwrap();
            for lookback in 1..4 {
                for horizon in 1..3 {
                    let frame = numeric_frame(n);
                    let Ok(w) = make_windows::<f64>(&frame, &plan, lookback, horizon) else {
                        let min = plan.n_train.min(plan.n_val).min(plan.n_test);
                        assert!(min < lookback + horizon);
                        continue;
                    };
                    for (set, range) in [(&w.train, plan.train()), (&w.val, plan.val()), (&w.test, plan.test())] {
                        assert_eq!(set.len(), range.len() - lookback - horizon + 1);
                        for (i, &s) in set.source.iter().enumerate() {
                            assert!(s >= range.start && s + lookback + horizon - 1 < range.end);
                            assert_eq!(set.targets[i], (s + lookback + horizon - 1) as f64);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn shuffled_windows_partition_every_window() {
    let frame = numeric_frame(120);
    let (w, rows) = shuffled_windows::<f64>(&frame, 0.2, 5, 1, 9).unwrap();
    let mut all: Vec<usize> = [&w.train, &w.val, &w.test]
        .iter()
        .flat_map(|s| s.source.clone())
        .collect();
    all.sort_unstable();
    assert_eq!(all, (0..115).collect::<Vec<_>>());
    assert!(!rows.is_empty());
    let (again, _) = shuffled_windows::<f64>(&frame, 0.2, 5, 1, 9).unwrap();
    assert_eq!(again, w);
}

#[test]
fn synthesis_is_deterministic_and_plausible() {
    let cfg = SynthConfig::new(42, 4000);
    let a = synthesize(&cfg).unwrap();
    assert_eq!(a, synthesize(&cfg).unwrap());
    assert_ne!(a, synthesize(&SynthConfig::new(43, 4000)).unwrap());
    assert!(a.target().iter().all(|&p| p >= 0.0));
    let mean = a.target().iter().sum::<f64>() / a.n() as f64;
    assert!((mean - 12.9785).abs() <= 0.3 * 12.9785, "mean power {mean}");
    assert!(synthesize(&SynthConfig::new(1, 99)).is_err());
}

#[test]
fn csv_round_trip() {
    let frame = synthesize(&SynthConfig::new(3, 150)).unwrap();
    let mut buf = Vec::new();
    frame.write_csv(&mut buf).unwrap();
    let back = read_csv(buf.as_slice(), frame.schema()).unwrap();
    assert_eq!(back, frame);
}
