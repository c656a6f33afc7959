//! Variance-minimising binary regression tree used as the segmenter.
//!
//! Each node is split at the (feature, midpoint) pair that maximises the
//! reduction in sum of squared deviations, subject to both children keeping
//! at least `leaf_size` rows. Leaves are the segments; every leaf remembers
//! the training rows that landed in it.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Relative tolerance (against the node's SSE) below which two gains are
/// considered tied and a gain is considered zero.
pub const GAIN_TOLERANCE: f64 = 1e-10;

// Below this many rows a node is scanned on the calling thread.
const PARALLEL_ROWS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

impl SplitRule {
    /// Rows with `x[feature] <= threshold` go left.
    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.feature] <= self.threshold
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub segment_id: usize,
    pub row_indices: Vec<usize>,
    pub mean_response: f64,
}

impl Leaf {
    pub fn count(&self) -> usize {
        self.row_indices.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        rule: SplitRule,
        count: usize,
        mean_response: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf(Leaf),
}

impl TreeNode {
    pub fn count(&self) -> usize {
        match self {
            TreeNode::Internal { count, .. } => *count,
            TreeNode::Leaf(leaf) => leaf.count(),
        }
    }

    pub fn mean_response(&self) -> f64 {
        match self {
            TreeNode::Internal { mean_response, .. } => *mean_response,
            TreeNode::Leaf(leaf) => leaf.mean_response,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: TreeNode,
    pub leaf_size: usize,
    pub n_leaves: usize,
    pub feature_names: Vec<String>,
}

/// Midpoint between consecutive distinct sorted values, never equal to `hi`
/// so that `lo` always routes left and `hi` always routes right.
#[inline]
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if mid < hi {
        mid
    } else {
        lo
    }
}

struct Candidate {
    threshold: f64,
    gain: f64,
}

/// Every admissible split of one feature, in increasing threshold order.
fn scan_feature(
    data: &Dataset,
    rows: &[usize],
    centered: &[f64],
    feature: usize,
    min_child: usize,
) -> Vec<Candidate> {
    let n = rows.len();
    let mut order: Vec<(f64, f64)> = rows
        .iter()
        .zip(centered)
        .map(|(&r, &y)| (data.value(r, feature), y))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let total: f64 = centered.iter().sum();
    let parent_term = total * total / n as f64;
    let mut out = Vec::new();
    let mut left_sum = 0.0;
    for k in 1..n {
        left_sum += order[k - 1].1;
        if k < min_child || n - k < min_child {
            continue;
        }
        let (lo, hi) = (order[k - 1].0, order[k].0);
        if lo >= hi {
            continue;
        }
        let right_sum = total - left_sum;
        let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64
            - parent_term;
        out.push(Candidate {
            threshold: midpoint(lo, hi),
            gain,
        });
    }
    out
}

/// Best variance-reducing split of `rows`, or `None` when no admissible split
/// has positive gain. Ties go to the lowest feature index, then the lowest
/// threshold.
pub fn best_split(data: &Dataset, rows: &[usize], min_child: usize) -> Option<SplitRule> {
    let n = rows.len();
    let min_child = min_child.max(1);
    if n < 2 * min_child {
        return None;
    }
    let y = data.response();
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64;
    let centered: Vec<f64> = rows.iter().map(|&r| y[r] - mean).collect();
    let sse: f64 = centered.iter().map(|v| v * v).sum();
    if sse <= 0.0 {
        return None;
    }
    let tol = GAIN_TOLERANCE * sse;

    let scan = |j| scan_feature(data, rows, &centered, j, min_child);
    let per_feature: Vec<Vec<Candidate>> = if n >= PARALLEL_ROWS {
        (0..data.n_features()).into_par_iter().map(scan).collect()
    } else {
        (0..data.n_features()).map(scan).collect()
    };

    let max_gain = per_feature
        .iter()
        .flatten()
        .map(|c| c.gain)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_gain > tol) {
        return None;
    }
    per_feature.iter().enumerate().find_map(|(feature, cands)| {
        cands
            .iter()
            .find(|c| c.gain >= max_gain - tol)
            .map(|c| SplitRule {
                feature,
                threshold: c.threshold,
                gain: c.gain,
            })
    })
}

fn grow(data: &Dataset, rows: Vec<usize>, leaf_size: usize) -> TreeNode {
    let y = data.response();
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
    match best_split(data, &rows, leaf_size) {
        None => TreeNode::Leaf(Leaf {
            segment_id: 0,
            row_indices: rows,
            mean_response: mean,
        }),
        Some(rule) => {
            let count = rows.len();
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.into_iter().partition(|&r| rule.goes_left(data.row(r)));
            let (left, right) = if count >= PARALLEL_ROWS {
                rayon::join(
                    || grow(data, left, leaf_size),
                    || grow(data, right, leaf_size),
                )
            } else {
                (grow(data, left, leaf_size), grow(data, right, leaf_size))
            };
            TreeNode::Internal {
                rule,
                count,
                mean_response: mean,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

fn number_leaves(node: &mut TreeNode, next: &mut usize) {
    match node {
        TreeNode::Leaf(leaf) => {
            leaf.segment_id = *next;
            *next += 1;
        }
        TreeNode::Internal { left, right, .. } => {
            number_leaves(left, next);
            number_leaves(right, next);
        }
    }
}

impl RegressionTree {
    /// Grows the tree with `leaf_size` as the minimum child size. Segment ids
    /// are assigned depth-first, left before right.
    pub fn fit(train: &Dataset, leaf_size: usize) -> Result<RegressionTree> {
        let n = train.n_rows();
        if leaf_size == 0 || leaf_size > n {
            return Err(Error::InvalidLeafSize {
                leaf_size,
                n_rows: n,
            });
        }
        let mut root = grow(train, (0..n).collect(), leaf_size);
        let mut n_leaves = 0;
        number_leaves(&mut root, &mut n_leaves);
        Ok(RegressionTree {
            root,
            leaf_size,
            n_leaves,
            feature_names: train.feature_names().to_vec(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Descends to the leaf containing `x`.
    pub fn leaf_for(&self, x: &[f64]) -> Result<&Leaf> {
        self.check_dim(x)?;
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf(leaf) => return Ok(leaf),
                TreeNode::Internal {
                    rule, left, right, ..
                } => node = if rule.goes_left(x) { left } else { right },
            }
        }
    }

    pub fn assign_leaf(&self, x: &[f64]) -> Result<usize> {
        self.leaf_for(x).map(|l| l.segment_id)
    }

    /// Plain CART prediction: the training mean of the leaf.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.leaf_for(x).map(|l| l.mean_response)
    }

    /// Leaves in segment-id order.
    pub fn leaves(&self) -> Vec<&Leaf> {
        fn walk<'a>(node: &'a TreeNode, out: &mut Vec<&'a Leaf>) {
            match node {
                TreeNode::Leaf(leaf) => out.push(leaf),
                TreeNode::Internal { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.n_leaves);
        walk(&self.root, &mut out);
        out
    }

    /// The root-to-leaf rule path of one segment.
    pub fn segment_profile(&self, segment_id: usize) -> Result<Profile> {
        fn walk(
            node: &TreeNode,
            target: usize,
            names: &[String],
            path: &mut Vec<Condition>,
        ) -> Option<(usize, f64)> {
            match node {
                TreeNode::Leaf(leaf) if leaf.segment_id == target => {
                    Some((leaf.count(), leaf.mean_response))
                }
                TreeNode::Leaf(_) => None,
                TreeNode::Internal {
                    rule, left, right, ..
                } => {
                    for (side, child) in [(Side::Le, left), (Side::Gt, right)] {
                        path.push(Condition {
                            feature: rule.feature,
                            feature_name: names[rule.feature].clone(),
                            side,
                            threshold: rule.threshold,
                        });
                        if let Some(found) = walk(child, target, names, path) {
                            return Some(found);
                        }
                        path.pop();
                    }
                    None
                }
            }
        }
        let mut conditions = Vec::new();
        let (count, mean_response) = walk(&self.root, segment_id, &self.feature_names, &mut conditions)
            .ok_or(Error::UnknownSegment(segment_id))?;
        Ok(Profile {
            segment_id,
            conditions,
            count,
            mean_response,
        })
    }

    /// Nested export with feature names, suitable for rendering tree excerpts.
    pub fn export(&self) -> ExportNode {
        fn convert(node: &TreeNode, names: &[String]) -> ExportNode {
            match node {
                TreeNode::Leaf(leaf) => ExportNode::Leaf {
                    segment_id: leaf.segment_id,
                    count: leaf.count(),
                    mean: leaf.mean_response,
                },
                TreeNode::Internal {
                    rule,
                    count,
                    mean_response,
                    left,
                    right,
                } => ExportNode::Split {
                    feature: names[rule.feature].clone(),
                    threshold: rule.threshold,
                    gain: rule.gain,
                    count: *count,
                    mean: *mean_response,
                    left: Box::new(convert(left, names)),
                    right: Box::new(convert(right, names)),
                },
            }
        }
        convert(&self.root, &self.feature_names)
    }

    /// Indented text rendering, optionally truncated below `max_depth`.
    pub fn render_text(&self, max_depth: Option<usize>) -> String {
        fn walk(
            node: &TreeNode,
            names: &[String],
            depth: usize,
            max_depth: Option<usize>,
            out: &mut String,
        ) {
            let pad = "|   ".repeat(depth);
            match node {
                TreeNode::Leaf(leaf) => out.push_str(&format!(
                    "{pad}segment {}: n = {}, mean = {:.4}\n",
                    leaf.segment_id,
                    leaf.count(),
                    leaf.mean_response
                )),
                TreeNode::Internal {
                    rule,
                    count,
                    mean_response,
                    left,
                    right,
                } => {
                    if max_depth.is_some_and(|m| depth >= m) {
                        out.push_str(&format!(
                            "{pad}... n = {count}, mean = {mean_response:.4}\n"
                        ));
                        return;
                    }
                    let name = &names[rule.feature];
                    out.push_str(&format!("{pad}{name} <= {:.4}\n", rule.threshold));
                    walk(left, names, depth + 1, max_depth, out);
                    out.push_str(&format!("{pad}{name} >  {:.4}\n", rule.threshold));
                    walk(right, names, depth + 1, max_depth, out);
                }
            }
        }
        let mut out = String::new();
        walk(&self.root, &self.feature_names, 0, max_depth, &mut out);
        out
    }
}

pub fn build_tree(train: &Dataset, leaf_size: usize) -> Result<RegressionTree> {
    RegressionTree::fit(train, leaf_size)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum ExportNode {
    Split {
        feature: String,
        threshold: f64,
        gain: f64,
        count: usize,
        mean: f64,
        left: Box<ExportNode>,
        right: Box<ExportNode>,
    },
    Leaf {
        segment_id: usize,
        count: usize,
        mean: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Le,
    Gt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub feature_name: String,
    pub side: Side,
    pub threshold: f64,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.side {
            Side::Le => "<=",
            Side::Gt => ">",
        };
        write!(f, "{} {} {}", self.feature_name, op, self.threshold)
    }
}

/// Conditions on the root-to-leaf path of a segment, root first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub segment_id: usize,
    pub conditions: Vec<Condition>,
    pub count: usize,
    pub mean_response: f64,
}

impl Profile {
    pub fn rule_text(&self) -> String {
        if self.conditions.is_empty() {
            return "(all rows)".to_string();
        }
        self.conditions
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "segment {} (n = {}, mean = {}): {}",
            self.segment_id,
            self.count,
            self.mean_response,
            self.rule_text()
        )
    }
}
