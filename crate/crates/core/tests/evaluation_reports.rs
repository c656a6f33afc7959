use std::io::Write;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeseg::dataset::{train_test_split, Dataset};
use treeseg::evaluation::{
    ablation_outliers, compare_external, model_generalization_sweep, rmse, segment_summary, summary_csv,
    tree_generalization_sweep,
};
use treeseg::pipeline::{fit_segmented, FitConfig, LeafMethod, OutlierConfig};

fn noisy(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..1.0)])
        .collect();
    let y = rows
        .iter()
        .map(|r| (r[0]).sin() + r[1] + rng.random_range(-0.5..0.5))
        .collect();
    Dataset::from_rows(&rows, y).unwrap()
}

#[test]
fn train_error_non_decreasing_with_leaf_size() {
    let split = train_test_split(&noisy(1, 800), 0.7, 2).unwrap();
    let report = tree_generalization_sweep(&split, &[1, 5, 10, 40, 100, 300, 560], "noisy").unwrap();
    for w in report.rows.windows(2) {
        assert!(w[1].train_rmse >= w[0].train_rmse - 1e-12, "{:?}", w);
    }
    // fully grown trees overfit; a single leaf does not
    let first = &report.rows[0];
    let last = report.rows.last().unwrap();
    assert!(first.gap() > last.gap());
}

#[test]
fn constant_model_sweep_reproduces_tree_sweep() {
    let split = train_test_split(&noisy(3, 500), 0.7, 4).unwrap();
    let grid = [3, 10, 30, 100];
    let tree = tree_generalization_sweep(&split, &grid, "t").unwrap();
    let model = model_generalization_sweep(&split, &grid, &FitConfig::new(1, LeafMethod::Constant), "t").unwrap();
    for (a, b) in tree.rows.iter().zip(&model.rows) {
        assert_eq!(a.train_rmse, b.train_rmse);
        assert_eq!(a.test_rmse, b.test_rmse);
        assert_eq!(a.n_leaves, b.n_leaves);
    }
}

#[test]
fn sweeps_are_reproducible() {
    let split = train_test_split(&noisy(5, 400), 0.7, 6).unwrap();
    let cfg = FitConfig::new(1, LeafMethod::Linear).with_outliers(OutlierConfig::default());
    let a = model_generalization_sweep(&split, &[10, 50], &cfg, "t").unwrap();
    let b = model_generalization_sweep(&split, &[10, 50], &cfg, "t").unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.train_rmse, x.test_rmse, x.n_leaves), (y.train_rmse, y.test_rmse, y.n_leaves));
        assert!(x.n_train_used < x.n_train);
    }
}

#[test]
fn summary_of_two_plateaus() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows: Vec<Vec<f64>> = (0..400).map(|i| vec![i as f64]).collect();
    let y: Vec<f64> = (0..400)
        .map(|i| if i < 200 { 2.0 } else { 8.0 } + rng.random_range(-0.1..0.1))
        .collect();
    let data = Dataset::from_rows(&rows, y).unwrap();
    let model = fit_segmented(&data, &FitConfig::new(150, LeafMethod::Constant)).unwrap();
    let summary = segment_summary(&model, &data).unwrap();
    assert_eq!(summary.len(), 2);
    assert_eq!(summary.iter().map(|s| s.count).sum::<usize>(), 400);
    let tol = 0.1 / (200f64).sqrt() * 4.0;
    assert!((summary[0].mean_response - 2.0).abs() < tol);
    assert!((summary[1].mean_response - 8.0).abs() < tol);
    assert!(summary[0].profile.contains("<= 199.5"));
    assert!(summary_csv(&summary).lines().count() == 3);

    let single = fit_segmented(&data, &FitConfig::new(400, LeafMethod::Constant)).unwrap();
    let s = segment_summary(&single, &data).unwrap();
    assert_eq!(s.len(), 1);
    assert!((s[0].mean_response - data.response().iter().sum::<f64>() / 400.0).abs() < 1e-12);
}

#[test]
fn zero_contamination_arm_matches_unfiltered_arm() {
    let split = train_test_split(&noisy(8, 300), 0.7, 9).unwrap();
    let cfg = FitConfig::new(30, LeafMethod::Linear).with_outliers(OutlierConfig {
        contamination: 0.0,
        ..OutlierConfig::default()
    });
    let r = ablation_outliers(&split, &cfg).unwrap();
    assert_eq!(r.removed, 0);
    assert_eq!(r.off_test_rmse, r.on_test_rmse);
    assert_eq!(r.off_train_rmse, r.on_train_rmse);

    let cfg = FitConfig::new(30, LeafMethod::Linear).with_outliers(OutlierConfig {
        contamination: 0.1,
        ..OutlierConfig::default()
    });
    let r = ablation_outliers(&split, &cfg).unwrap();
    assert_eq!(r.removed, 21);
    assert!(r.text().contains("removed=21"));
}

#[test]
fn external_predictions() {
    let data = noisy(10, 20);
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, header: &str, values: Vec<f64>| {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "{header}").unwrap();
        for v in values {
            writeln!(f, "{v}").unwrap();
        }
        path
    };
    let exact = write("exact.csv", "prediction", data.response().to_vec());
    assert_eq!(compare_external(&exact, &data).unwrap(), 0.0);
    let shifted = write("shift.csv", "yhat", data.response().iter().map(|v| v + 1.0).collect());
    assert!((compare_external(&shifted, &data).unwrap() - 1.0).abs() < 1e-12);
    let short = write("short.csv", "prediction", vec![1.0; 5]);
    assert!(compare_external(&short, &data).is_err());
    assert!(compare_external(dir.path().join("missing.csv"), &data).is_err());
}

proptest! {
    #[test]
    fn rmse_is_symmetric_and_nonnegative(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
        let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let ab = rmse(&a, &b).unwrap();
        prop_assert_eq!(ab, rmse(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }
}
