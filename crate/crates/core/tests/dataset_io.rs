use std::io::Write;

use proptest::prelude::*;
use treeseg::dataset::{load_csv, train_test_split, ColumnSpec, Dataset, Transform};

fn specs_for(data: &Dataset) -> Vec<ColumnSpec> {
    let mut specs: Vec<ColumnSpec> = data.feature_names().iter().map(ColumnSpec::numeric).collect();
    specs.push(ColumnSpec::target(data.target_name()));
    specs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 3), 1..30),
        y in prop::collection::vec(prop::num::f64::NORMAL, 30),
    ) {
        let y = y[..rows.len()].to_vec();
        let data = Dataset::from_rows(&rows, y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        data.write_csv(&path).unwrap();
        let back = load_csv(&path, &specs_for(&data)).unwrap().data;
        prop_assert_eq!(back.n_rows(), data.n_rows());
        for (a, b) in back.features().iter().zip(data.features()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in back.response().iter().zip(data.response()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn split_is_a_deterministic_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in 0u64..1000) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let data = Dataset::from_rows(&rows, (0..n).map(|i| i as f64).collect()).unwrap();
        match train_test_split(&data, frac, seed) {
            Ok(s) => {
                let mut all: Vec<usize> = s.train_rows.iter().chain(&s.test_rows).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(s.train.n_rows(), (frac * n as f64).round() as usize);
                let again = train_test_split(&data, frac, seed).unwrap();
                prop_assert_eq!(again.train_rows, s.train_rows);
            }
            Err(_) => {
                let k = (frac * n as f64).round() as usize;
                prop_assert!(k == 0 || k == n);
            }
        }
    }
}

#[test]
fn one_hot_blocks_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "carrier,dist,delay").unwrap();
    for (i, c) in ["AA", "UA", "DL", "AA", "DL", "", "UA"].iter().enumerate() {
        writeln!(f, "{c},{},{}", i * 100, i as f64 * 1.5 + 1.0).unwrap();
    }
    drop(f);
    let specs = [
        ColumnSpec::categorical("carrier"),
        ColumnSpec::numeric("dist"),
        ColumnSpec::target("delay").with_transform(Transform::Log),
    ];
    let loaded = load_csv(&path, &specs).unwrap();
    assert_eq!(loaded.report.rows_dropped, 1);
    assert_eq!(loaded.data.n_features(), 4);
    assert_eq!(loaded.data.feature_names()[..3], ["carrier=AA", "carrier=DL", "carrier=UA"]);
    for row in loaded.data.rows() {
        assert_eq!(row[..3].iter().sum::<f64>(), 1.0);
    }
    assert!((loaded.data.response()[0] - 1.0f64.ln()).abs() < 1e-15);
}

#[test]
fn ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    std::fs::write(&path, "a,b,y\n1,2,0\n3,4,5\n").unwrap();
    assert!(load_csv(dir.path().join("missing.csv"), &[ColumnSpec::target("y")]).is_err());
    assert!(load_csv(&path, &[ColumnSpec::numeric("zz"), ColumnSpec::target("y")]).is_err());
    assert!(load_csv(&path, &[ColumnSpec::numeric("a")]).is_err());
    assert!(load_csv(&path, &[ColumnSpec::target("y").with_transform(Transform::Log)]).is_err());
    let ok = load_csv(&path, &[ColumnSpec::numeric("a"), ColumnSpec::numeric("b"), ColumnSpec::target("y")]).unwrap();
    assert_eq!((ok.data.n_rows(), ok.data.n_features()), (2, 2));
}
