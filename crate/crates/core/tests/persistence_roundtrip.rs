use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeseg::dataset::Dataset;
use treeseg::persistence::{from_bytes, load_model, save_model, to_bytes};
use treeseg::pipeline::{fit_segmented, FitConfig, LeafMethod, SegmentedModel};
use treeseg::Error;

fn data() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0), rng.random::<f64>() * 1e-7])
        .collect();
    let y = rows
        .iter()
        .map(|r| r[0].sin() * std::f64::consts::PI + r[1] / 3.0 + rng.random_range(-0.1..0.1))
        .collect();
    Dataset::from_rows(&rows, y).unwrap()
}

fn model(method: LeafMethod) -> SegmentedModel {
    fit_segmented(&data(), &FitConfig::new(50, method)).unwrap()
}

#[test]
fn reload_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for method in [LeafMethod::Constant, LeafMethod::Linear, LeafMethod::Gp] {
        let m = model(method);
        let path = dir.path().join("m.json");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        for _ in 0..1000 {
            let x = [rng.random_range(-5.0..5.0), rng.random_range(-1.0..2.0), rng.random_range(-1.0..1.0)];
            assert_eq!(m.predict(&x).unwrap().to_bits(), back.predict(&x).unwrap().to_bits());
        }
    }
}

#[test]
fn saving_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let m = model(LeafMethod::Gp);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    save_model(&m, &a).unwrap();
    save_model(&m, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let back = load_model(&a).unwrap();
    assert_eq!(to_bytes(&back).unwrap(), std::fs::read(&a).unwrap());
}

#[test]
fn keys_are_sorted() {
    let text = String::from_utf8(to_bytes(&model(LeafMethod::Constant)).unwrap()).unwrap();
    let top: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \"") && !l.starts_with("   "))
        .collect();
    assert_eq!(top.len(), 2);
    assert!(top[0].contains("\"model\"") && top[1].contains("\"schema_version\""));
}

#[test]
fn corrupted_documents_are_rejected() {
    let bytes = to_bytes(&model(LeafMethod::Linear)).unwrap();
    assert!(from_bytes(&bytes[..bytes.len() / 2]).is_err());
    assert!(from_bytes(b"not json").is_err());

    let mut value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    value["model"]["segments"].as_array_mut().unwrap().pop();
    assert!(matches!(from_bytes(&serde_json::to_vec(&value).unwrap()), Err(Error::Document(_))));

    let mut value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    value["model"]["segments"][0]["model"]["weights"] = serde_json::json!([1.0]);
    assert!(from_bytes(&serde_json::to_vec(&value).unwrap()).is_err());
}

#[test]
fn newer_schema_is_refused() {
    let bytes = to_bytes(&model(LeafMethod::Constant)).unwrap();
    let mut value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    value["schema_version"] = serde_json::json!(2);
    match from_bytes(&serde_json::to_vec(&value).unwrap()) {
        Err(Error::SchemaVersion { found: 2, supported: 1 }) => {}
        other => panic!("unexpected {other:?}"),
    }
    value.as_object_mut().unwrap().remove("schema_version");
    assert!(from_bytes(&serde_json::to_vec(&value).unwrap()).is_err());
}

#[test]
fn failed_save_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing_dir").join("m.json");
    assert!(save_model(&model(LeafMethod::Constant), &target).is_err());
    assert!(!target.exists());
    assert!(load_model(dir.path().join("nope.json")).is_err());
}

#[test]
fn deep_trees_survive_reload() {
    // strictly increasing response along one feature gives a long spine
    let rows: Vec<Vec<f64>> = (0..400).map(|i| vec![i as f64]).collect();
    let y = (0..400).map(|i| (i as f64).powi(4)).collect();
    let d = Dataset::from_rows(&rows, y).unwrap();
    let m = fit_segmented(&d, &FitConfig::new(1, LeafMethod::Constant)).unwrap();
    let back = from_bytes(&to_bytes(&m).unwrap()).unwrap();
    assert_eq!(back.segments.len(), m.segments.len());
}
