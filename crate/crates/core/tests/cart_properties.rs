use proptest::prelude::*;
use treeseg::cart::{best_split, midpoint, RegressionTree, TreeNode};
use treeseg::dataset::Dataset;

fn dataset() -> impl Strategy<Value = Dataset> {
    (2usize..=40, 1usize..=3).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-20i32..20, d), n),
            prop::collection::vec(-50.0f64..50.0, n),
        )
            .prop_map(|(rows, y)| {
                let rows: Vec<Vec<f64>> = rows
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| f64::from(v) * 0.5).collect())
                    .collect();
                Dataset::from_rows(&rows, y).unwrap()
            })
    })
}

fn sse(y: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m).powi(2)).sum()
}

fn node_rows(data: &Dataset, tree: &RegressionTree) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    // (left rows, right rows, gain) for each internal node, found by routing
    fn walk(node: &TreeNode, rows: Vec<usize>, data: &Dataset, out: &mut Vec<(Vec<usize>, Vec<usize>, f64)>) {
        if let TreeNode::Internal { rule, left, right, .. } = node {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| rule.goes_left(data.row(i)));
            out.push((l.clone(), r.clone(), rule.gain));
            walk(left, l, data, out);
            walk(right, r, data, out);
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, (0..data.n_rows()).collect(), data, &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn leaves_partition_training_rows(data in dataset(), leaf_size in 1usize..8) {
        prop_assume!(leaf_size <= data.n_rows());
        let tree = RegressionTree::fit(&data, leaf_size).unwrap();
        let mut all: Vec<usize> = tree.leaves().iter().flat_map(|l| l.row_indices.clone()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..data.n_rows()).collect::<Vec<_>>());
        for (id, leaf) in tree.leaves().iter().enumerate() {
            prop_assert_eq!(leaf.segment_id, id);
            prop_assert!(leaf.count() >= leaf_size);
        }
    }

    #[test]
    fn training_rows_route_to_their_leaf(data in dataset(), leaf_size in 1usize..8) {
        prop_assume!(leaf_size <= data.n_rows());
        let tree = RegressionTree::fit(&data, leaf_size).unwrap();
        for leaf in tree.leaves() {
            for &i in &leaf.row_indices {
                prop_assert_eq!(tree.assign_leaf(data.row(i)).unwrap(), leaf.segment_id);
            }
        }
    }

    #[test]
    fn gain_matches_sse_identity(data in dataset(), leaf_size in 1usize..6) {
        prop_assume!(leaf_size <= data.n_rows());
        let tree = RegressionTree::fit(&data, leaf_size).unwrap();
        let y = data.response();
        for (l, r, gain) in node_rows(&data, &tree) {
            let parent: Vec<f64> = l.iter().chain(&r).map(|&i| y[i]).collect();
            let ly: Vec<f64> = l.iter().map(|&i| y[i]).collect();
            let ry: Vec<f64> = r.iter().map(|&i| y[i]).collect();
            let want = sse(&parent) - sse(&ly) - sse(&ry);
            prop_assert!((gain - want).abs() <= 1e-9 * want.abs().max(sse(&parent)).max(1e-12),
                "gain {} vs {}", gain, want);
        }
    }

    #[test]
    fn leaf_count_non_increasing_in_leaf_size(data in dataset()) {
        let mut prev = usize::MAX;
        for leaf_size in 1..=data.n_rows().min(12) {
            let n = RegressionTree::fit(&data, leaf_size).unwrap().n_leaves;
            prop_assert!(n <= prev, "leaf_size {}: {} > {}", leaf_size, n, prev);
            prev = n;
        }
    }

    #[test]
    fn routing_invariant_to_positive_rescaling(data in dataset(), leaf_size in 1usize..6, scale in 0.01f64..100.0, col in 0usize..3) {
        prop_assume!(leaf_size <= data.n_rows());
        let col = col % data.n_features();
        let scaled_rows: Vec<Vec<f64>> = data
            .rows()
            .map(|r| r.iter().enumerate().map(|(j, v)| if j == col { v * scale } else { *v }).collect())
            .collect();
        let scaled = Dataset::from_rows(&scaled_rows, data.response().to_vec()).unwrap();
        let a = RegressionTree::fit(&data, leaf_size).unwrap();
        let b = RegressionTree::fit(&scaled, leaf_size).unwrap();
        let members = |t: &RegressionTree| -> Vec<Vec<usize>> {
            let mut m: Vec<Vec<usize>> = t.leaves().iter().map(|l| l.row_indices.clone()).collect();
            m.sort();
            m
        };
        prop_assert_eq!(members(&a), members(&b));
    }

    #[test]
    fn split_children_respect_min_child(data in dataset(), min_child in 1usize..10) {
        let rows: Vec<usize> = (0..data.n_rows()).collect();
        if let Some(rule) = best_split(&data, &rows, min_child) {
            let left = rows.iter().filter(|&&i| rule.goes_left(data.row(i))).count();
            prop_assert!(left >= min_child && rows.len() - left >= min_child);
            prop_assert!(rule.gain > 0.0);
        }
    }

    #[test]
    fn midpoint_separates(lo in -1e6f64..1e6, delta in 1e-9f64..1e3) {
        let hi = lo + delta;
        prop_assume!(hi > lo);
        let m = midpoint(lo, hi);
        prop_assert!(lo <= m && m < hi);
    }
}

#[test]
fn step_function_splits_at_plateau_boundary() {
    let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
    let y = (0..100).map(|i| if i < 50 { -2.0 } else { 3.0 }).collect();
    let data = Dataset::from_rows(&rows, y).unwrap();
    let tree = RegressionTree::fit(&data, 10).unwrap();
    match &tree.root {
        TreeNode::Internal { rule, .. } => assert_eq!(rule.threshold, 49.5),
        TreeNode::Leaf(_) => panic!("expected a split"),
    }
    assert_eq!(tree.predict_mean(&[10.0]).unwrap(), -2.0);
    assert_eq!(tree.predict_mean(&[90.0]).unwrap(), 3.0);
}

#[test]
fn tree_training_error_no_worse_than_global_mean() {
    let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64 * 0.37).sin(), (i % 7) as f64]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0] * 3.0 + r[1]).collect();
    let data = Dataset::from_rows(&rows, y.clone()).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let base: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    for leaf_size in [1, 5, 30, 200] {
        let tree = RegressionTree::fit(&data, leaf_size).unwrap();
        let err: f64 = data.rows().zip(&y).map(|(x, v)| (tree.predict_mean(x).unwrap() - v).powi(2)).sum();
        assert!(err <= base + 1e-9);
    }
}

#[test]
fn profiles_list_root_first_conditions() {
    let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![(i % 8) as f64, (i / 8) as f64]).collect();
    let y: Vec<f64> = rows.iter().map(|r| 10.0 * r[0] + r[1]).collect();
    let data = Dataset::from_rows(&rows, y).unwrap();
    let tree = RegressionTree::fit(&data, 8).unwrap();
    let total: usize = (0..tree.n_leaves).map(|s| tree.segment_profile(s).unwrap().count).sum();
    assert_eq!(total, 64);
    let root_feature = match &tree.root {
        TreeNode::Internal { rule, .. } => rule.feature,
        TreeNode::Leaf(_) => unreachable!(),
    };
    for s in 0..tree.n_leaves {
        let p = tree.segment_profile(s).unwrap();
        assert_eq!(p.conditions[0].feature, root_feature);
        assert!(p.rule_text().contains(" AND ") || p.conditions.len() == 1);
    }
    assert!(tree.segment_profile(tree.n_leaves).is_err());
}
