//! Isolation Forest scoring and training-set outlier removal.
//!
//! Random axis-aligned partitions isolate anomalous points in fewer splits
//! than regular ones; the mean isolation depth over an ensemble, normalised
//! by the expected depth of an unsuccessful BST search, gives the score
//! `s(x) = 2^(-E[h(x)] / c(psi))`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_SUBSAMPLE: usize = 256;
pub const DEFAULT_CONTAMINATION: f64 = 0.05;

const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Harmonic number `H(k)`: summed exactly for small `k`, asymptotic otherwise.
fn harmonic(k: usize) -> f64 {
    if k <= 1024 {
        (1..=k).map(|i| 1.0 / i as f64).sum()
    } else {
        let k = k as f64;
        k.ln() + EULER_GAMMA + 0.5 / k
    }
}

/// Average path length `c(n)` of an unsuccessful search in a BST of `n` nodes.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    2.0 * harmonic(n - 1) - 2.0 * m / n as f64
}

/// Maps a mean isolation depth to an anomaly score in (0, 1).
pub fn score_from_depth(mean_depth: f64, c_psi: f64) -> f64 {
    (-mean_depth / c_psi).exp2()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum IsoNode {
    Split {
        feature: usize,
        value: f64,
        left: Box<IsoNode>,
        right: Box<IsoNode>,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    root: IsoNode,
    pub height_limit: usize,
}

impl IsolationTree {
    fn build(data: &Dataset, rows: &[usize], height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let root = grow(data, rows.to_vec(), 0, height_limit, rng);
        IsolationTree { root, height_limit }
    }

    /// Isolation depth of `x`, with the `c(size)` correction at unsplit leaves.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        let mut depth = 0usize;
        loop {
            match node {
                IsoNode::Leaf { size } => return depth as f64 + average_path_length(*size),
                IsoNode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *value { left } else { right };
                    depth += 1;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(node: &IsoNode) -> usize {
            match node {
                IsoNode::Leaf { .. } => 0,
                IsoNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

fn grow(
    data: &Dataset,
    rows: Vec<usize>,
    depth: usize,
    height_limit: usize,
    rng: &mut ChaCha8Rng,
) -> IsoNode {
    if rows.len() <= 1 || depth >= height_limit {
        return IsoNode::Leaf { size: rows.len() };
    }
    // Only features that vary inside the node can separate its rows.
    let ranges: Vec<(usize, f64, f64)> = (0..data.n_features())
        .filter_map(|j| {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                let v = data.value(r, j);
                (lo.min(v), hi.max(v))
            });
            (hi > lo).then_some((j, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return IsoNode::Leaf { size: rows.len() };
    }
    let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let value = loop {
        let v = rng.random_range(lo..hi);
        if v > lo {
            break v;
        }
    };
    let (left, right): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| data.value(r, feature) < value);
    IsoNode::Split {
        feature,
        value,
        left: Box::new(grow(data, left, depth + 1, height_limit, rng)),
        right: Box::new(grow(data, right, depth + 1, height_limit, rng)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    pub subsample_size: usize,
    pub c_psi: f64,
    pub n_features: usize,
}

impl IsolationForest {
    /// Builds `n_trees` trees, each on its own seeded subsample of `subsample`
    /// rows (drawn with replacement only when `subsample` exceeds the row count).
    pub fn fit(data: &Dataset, n_trees: usize, subsample: usize, seed: u64) -> Result<Self> {
        if subsample < 2 {
            return Err(Error::InvalidSubsample(subsample));
        }
        if n_trees == 0 {
            return Err(Error::InvalidParameter("isolation forest needs at least one tree".into()));
        }
        if data.is_empty() {
            return Err(Error::Empty("isolation forest training set"));
        }
        let n = data.n_rows();
        let height_limit = (subsample as f64).log2().ceil() as usize;
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = if subsample <= n {
                    index::sample(&mut rng, n, subsample).into_vec()
                } else {
                    (0..subsample).map(|_| rng.random_range(0..n)).collect()
                };
                IsolationTree::build(data, &rows, height_limit, &mut rng)
            })
            .collect();
        Ok(IsolationForest {
            trees,
            subsample_size: subsample,
            c_psi: average_path_length(subsample),
            n_features: data.n_features(),
        })
    }

    pub fn mean_path_length(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let total: f64 = self.trees.iter().map(|t| t.path_length(x)).sum();
        Ok(total / self.trees.len() as f64)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(score_from_depth(self.mean_path_length(x)?, self.c_psi))
    }

    pub fn score_all(&self, data: &Dataset) -> Result<Vec<f64>> {
        (0..data.n_rows())
            .into_par_iter()
            .map(|i| self.score(data.row(i)))
            .collect()
    }
}

pub fn fit_forest(data: &Dataset, n_trees: usize, subsample: usize, seed: u64) -> Result<IsolationForest> {
    IsolationForest::fit(data, n_trees, subsample, seed)
}

pub fn anomaly_score(forest: &IsolationForest, x: &[f64]) -> Result<f64> {
    forest.score(x)
}

#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub kept: Dataset,
    pub removed: Dataset,
    pub kept_rows: Vec<usize>,
    pub removed_rows: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Row indices of the `round(contamination * N)` highest scores. Among equal
/// scores the higher row index is removed first.
pub fn rows_to_remove(scores: &[f64], contamination: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&contamination) {
        return Err(Error::InvalidParameter(format!(
            "contamination must lie in [0, 1), got {contamination}"
        )));
    }
    let k = (contamination * scores.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(b.cmp(&a)));
    let mut removed = order[..k].to_vec();
    removed.sort_unstable();
    Ok(removed)
}

pub fn filter_outliers(data: &Dataset, forest: &IsolationForest, contamination: f64) -> Result<FilterOutcome> {
    let scores = forest.score_all(data)?;
    let removed_rows = rows_to_remove(&scores, contamination)?;
    let mut is_removed = vec![false; data.n_rows()];
    removed_rows.iter().for_each(|&r| is_removed[r] = true);
    let kept_rows: Vec<usize> = (0..data.n_rows()).filter(|&r| !is_removed[r]).collect();
    Ok(FilterOutcome {
        kept: data.select(&kept_rows),
        removed: data.select(&removed_rows),
        kept_rows,
        removed_rows,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob_with_outlier(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        rows.push(vec![100.0, 100.0]);
        Dataset::from_rows(&rows, vec![0.0; 501]).unwrap()
    }

    #[test]
    fn path_length_normaliser() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // 2 * (1 + 1/2) - 2 * 2/3
        assert!((average_path_length(3) - (3.0 - 4.0 / 3.0)).abs() < 1e-12);
        let approx = 2.0 * (255f64.ln() + EULER_GAMMA) - 2.0 * 255.0 / 256.0;
        assert!((average_path_length(256) - approx).abs() < 0.01);
    }

    #[test]
    fn depth_equal_to_normaliser_scores_half() {
        let c = average_path_length(256);
        assert_eq!(score_from_depth(c, c), 0.5);
    }

    #[test]
    fn trees_respect_height_limit() {
        let data = blob_with_outlier(3);
        let forest = IsolationForest::fit(&data, 100, 256, 9).unwrap();
        assert_eq!(forest.trees.len(), 100);
        assert!(forest.trees.iter().all(|t| t.height_limit == 8 && t.depth() <= 8));
    }

    #[test]
    fn identical_seed_identical_scores() {
        let data = blob_with_outlier(4);
        let a = IsolationForest::fit(&data, 50, 128, 17).unwrap();
        let b = IsolationForest::fit(&data, 50, 128, 17).unwrap();
        assert_eq!(a.score_all(&data).unwrap(), b.score_all(&data).unwrap());
    }

    #[test]
    fn duplicate_pair_scores_one_half() {
        // No split separates identical rows: each tree is a single leaf of
        // size psi, so E[h] = c(psi) and the score is 2^-1.
        let data = Dataset::from_rows(&[vec![3.0, 4.0], vec![3.0, 4.0]], vec![0.0; 2]).unwrap();
        for psi in [2, 256] {
            let forest = IsolationForest::fit(&data, 10, psi, 1).unwrap();
            for row in data.rows() {
                assert!((forest.score(row).unwrap() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scores_lie_strictly_inside_unit_interval() {
        let data = blob_with_outlier(5);
        let forest = IsolationForest::fit(&data, 100, 256, 2).unwrap();
        for s in forest.score_all(&data).unwrap() {
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn planted_point_ranks_first() {
        let data = blob_with_outlier(6);
        let forest = IsolationForest::fit(&data, 100, 256, 11).unwrap();
        let scores = forest.score_all(&data).unwrap();
        let top = (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        assert_eq!(top, 500);
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let p99 = sorted[(0.99 * sorted.len() as f64) as usize];
        assert!(scores[500] > p99);
    }

    #[test]
    fn filter_removes_planted_point() {
        let data = blob_with_outlier(7);
        let forest = IsolationForest::fit(&data, 100, 256, 5).unwrap();
        let out = filter_outliers(&data, &forest, 1.0 / 501.0).unwrap();
        assert_eq!(out.removed_rows, vec![500]);
        assert_eq!(out.kept.n_rows(), 500);
    }

    #[test]
    fn zero_contamination_keeps_everything() {
        let data = blob_with_outlier(8);
        let forest = IsolationForest::fit(&data, 20, 64, 5).unwrap();
        let out = filter_outliers(&data, &forest, 0.0).unwrap();
        assert_eq!(out.kept, data);
        assert!(out.removed.is_empty());
    }

    #[test]
    fn removal_count_and_tie_order() {
        let scores: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let removed = rows_to_remove(&scores, 0.1).unwrap();
        assert_eq!(removed.len(), 10);
        // ties at the cut keep the lower indices
        let ties = vec![0.5; 4];
        assert_eq!(rows_to_remove(&ties, 0.5).unwrap(), vec![2, 3]);
        assert!(rows_to_remove(&ties, 1.0).is_err());
        assert!(rows_to_remove(&ties, -0.1).is_err());
    }

    #[test]
    fn partition_is_exhaustive() {
        let data = blob_with_outlier(9);
        let forest = IsolationForest::fit(&data, 30, 100, 5).unwrap();
        let out = filter_outliers(&data, &forest, 0.13).unwrap();
        let mut all: Vec<usize> = out.kept_rows.iter().chain(&out.removed_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..501).collect::<Vec<_>>());
        assert_eq!(out.removed_rows.len(), (0.13f64 * 501.0).round() as usize);
    }

    #[test]
    fn duplicates_of_an_inlier_score_identically() {
        let mut rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 17) as f64, (i % 13) as f64]).collect();
        rows.push(rows[5].clone());
        let data = Dataset::from_rows(&rows, vec![0.0; 201]).unwrap();
        let forest = IsolationForest::fit(&data, 50, 64, 3).unwrap();
        assert_eq!(forest.score(&rows[5]).unwrap(), forest.score(&rows[200]).unwrap());
    }

    #[test]
    fn fit_errors() {
        let data = blob_with_outlier(1);
        assert!(matches!(
            IsolationForest::fit(&data, 10, 1, 0),
            Err(Error::InvalidSubsample(1))
        ));
        let forest = IsolationForest::fit(&data, 10, 16, 0).unwrap();
        assert!(forest.score(&[1.0]).is_err());
    }

    #[test]
    fn oversized_subsample_draws_with_replacement() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0.0; 3]).unwrap();
        let forest = IsolationForest::fit(&data, 5, 16, 0).unwrap();
        assert_eq!(forest.subsample_size, 16);
        assert!(forest.trees.iter().all(|t| t.height_limit == 4));
    }
}
