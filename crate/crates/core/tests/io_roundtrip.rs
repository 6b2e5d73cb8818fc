use battbayes_core::app::io::{
    load_time_series, load_training_set, read_chain, read_pdf_curve, read_summary, write_chain,
    write_pdf_curve, write_summary, write_time_series, write_training_set, FadePoint, SummaryRow,
    TrainingRecord,
};
use battbayes_core::app::AppError;
use battbayes_core::{Chain, Family, TimeSeries};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e12..1e12f64, -1.0..1.0f64, Just(0.0), Just(1e-300), Just(f64::MAX)]
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Normal), Just(Family::Gamma), Just(Family::Beta), Just(Family::Rayleigh)]
}

fn record() -> impl Strategy<Value = TrainingRecord> {
    (
        "[A-Za-z][A-Za-z0-9_ -]{0,8}",
        (-20.0..60.0f64, 0.01..10.0f64, 0.0..100.0f64),
        1usize..4,
        prop::collection::vec((1.0..1e5f64, prop::collection::vec(0.0..100.0f64, 3)), 1..6),
    )
        .prop_map(|(id, (t, c, soc), reps, pts)| TrainingRecord {
            cell_id: id.trim().to_string() + "x",
            temp_c: t,
            c_rate: c,
            soc_avg: soc,
            soc_min: soc * 0.5,
            soc_max: soc.max(50.0),
            points: pts
                .into_iter()
                .enumerate()
                // checkpoints strictly increase so each forms its own group
                .map(|(i, (ah, f))| FadePoint { ah: ah + 1e5 * i as f64, fade_pct: f[..reps].to_vec() })
                .collect(),
        })
}

proptest! {
    #[test]
    fn training_set_round_trips(records in prop::collection::vec(record(), 1..4)) {
        // distinct cell ids
        let records: Vec<TrainingRecord> = records
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| { r.cell_id = format!("{}{i}", r.cell_id); r })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        write_training_set(&path, &records, &["synthetic".into()]).unwrap();
        prop_assert_eq!(load_training_set(&path).unwrap(), records);
    }

    #[test]
    fn time_series_round_trips(values in prop::collection::vec(finite(), 1..200), period in 0.001..1e4f64) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let period = (period * 1e3).round() / 1e3;
        let s = TimeSeries::new(values, period);
        write_time_series(&path, &s, &[]).unwrap();
        let back = load_time_series(&path).unwrap();
        prop_assert_eq!(back.values, s.values);
        prop_assert!((back.sample_period - s.sample_period).abs() <= 1e-9 * s.sample_period);
    }

    #[test]
    fn chain_round_trips(
        samples in prop::collection::vec(finite(), 0..300),
        family in family(),
        idx in 0usize..50,
        seed in any::<u64>(),
        accepted in 0usize..300,
        burn_in in 0usize..300,
    ) {
        let chain = Chain { variable: format!("lambda[{idx}]"), family, samples, accepted, seed, burn_in };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_chain(&path, &chain).unwrap();
        prop_assert_eq!(read_chain(&path).unwrap(), chain);
    }

    #[test]
    fn summary_round_trips(rows in prop::collection::vec(
        ("[a-zA-Z_]{1,6}(\\[[0-9]{1,2}\\])?", family(), finite(), finite(), finite(), finite()), 0..20)
    ) {
        let rows: Vec<SummaryRow> = rows
            .into_iter()
            .map(|(variable, family, mean, sd, ci_low, ci_high)| SummaryRow { variable, family, mean, sd, ci_low, ci_high })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_summary(&path, &rows, &["note".into()]).unwrap();
        prop_assert_eq!(read_summary(&path).unwrap(), rows);
    }

    #[test]
    fn pdf_curve_round_trips(curve in prop::collection::vec((finite(), 0.0..1e6f64), 0..100)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_pdf_curve(&path, &curve, &[]).unwrap();
        prop_assert_eq!(read_pdf_curve(&path).unwrap(), curve);
    }
}

#[test]
fn missing_columns_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "cell_id,temp_c,ah\nA,25,100\n").unwrap();
    match load_training_set(&path) {
        Err(AppError::Schema { missing, .. }) => {
            assert!(missing.contains(&"fade_pct".to_string()));
            assert!(missing.contains(&"c_rate".to_string()));
        }
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn bundled_dataset_is_labelled_and_loads() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_cycling.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().next().unwrap().contains("SYNTHETIC"));
    let records = load_training_set(&path).unwrap();
    assert_eq!(records.len(), 3);
    let points: usize = records.iter().map(|r| r.points.len()).sum();
    assert_eq!(points, 41);
}
