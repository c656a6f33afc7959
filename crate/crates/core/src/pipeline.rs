//! Segment-then-fit: optional outlier removal, tree segmentation, one
//! regressor per leaf, and routing of new records to their leaf's model.

use std::fmt;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::RegressionTree;
use crate::dataset::{Dataset, Scaler, Schema};
use crate::error::{Error, Result};
use crate::leaf_models::{fit_constant, fit_gp, fit_ols, ConstantModel, GpSettings, LeafModel};
use crate::outlier::{
    filter_outliers, IsolationForest, DEFAULT_CONTAMINATION, DEFAULT_SUBSAMPLE, DEFAULT_TREES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafMethod {
    Constant,
    Linear,
    Gp,
}

impl LeafMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            LeafMethod::Constant => "constant",
            LeafMethod::Linear => "linear",
            LeafMethod::Gp => "gp",
        }
    }
}

impl fmt::Display for LeafMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LeafMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" => Ok(LeafMethod::Constant),
            "linear" | "ols" => Ok(LeafMethod::Linear),
            "gp" => Ok(LeafMethod::Gp),
            other => Err(Error::InvalidParameter(format!("unknown leaf method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    pub contamination: f64,
    pub n_trees: usize,
    pub subsample: usize,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        OutlierConfig {
            contamination: DEFAULT_CONTAMINATION,
            n_trees: DEFAULT_TREES,
            subsample: DEFAULT_SUBSAMPLE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub leaf_size: usize,
    pub leaf_method: LeafMethod,
    pub outliers: Option<OutlierConfig>,
    pub seed: u64,
    pub ridge_eps: f64,
    pub gp: GpSettings,
    /// When false a failed leaf fit aborts the whole fit instead of
    /// degrading that leaf to its mean.
    pub allow_fallback: bool,
}

impl FitConfig {
    pub fn new(leaf_size: usize, leaf_method: LeafMethod) -> Self {
        FitConfig {
            leaf_size,
            leaf_method,
            outliers: None,
            seed: 0,
            ridge_eps: 0.0,
            gp: GpSettings::default(),
            allow_fallback: true,
        }
    }

    pub fn with_outliers(mut self, outliers: OutlierConfig) -> Self {
        self.outliers = Some(outliers);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.leaf_size == 0 {
            return Err(Error::InvalidParameter("leaf_size must be at least 1".into()));
        }
        if !(self.ridge_eps >= 0.0 && self.ridge_eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("ridge_eps must be >= 0, got {}", self.ridge_eps)));
        }
        if let Some(o) = &self.outliers {
            if !(0.0..1.0).contains(&o.contamination) {
                return Err(Error::InvalidParameter(format!(
                    "contamination must lie in [0, 1), got {}",
                    o.contamination
                )));
            }
            if o.n_trees == 0 {
                return Err(Error::InvalidParameter("outlier forest needs at least one tree".into()));
            }
            if o.subsample < 2 {
                return Err(Error::InvalidSubsample(o.subsample));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LeafStatus {
    Fitted,
    Fallback { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: usize,
    pub count: usize,
    pub mean_response: f64,
    pub response_std: f64,
    pub scaler: Option<Scaler>,
    pub model: LeafModel,
    pub status: LeafStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rows_in: usize,
    /// Indices into the training set handed to the fit.
    pub removed_rows: Vec<usize>,
    pub n_leaves: usize,
    pub fallbacks: usize,
}

impl FitReport {
    pub fn rows_used(&self) -> usize {
        self.rows_in - self.removed_rows.len()
    }

    /// Training rows the tree and leaf models actually saw, in order.
    pub fn kept_rows(&self) -> Vec<usize> {
        let mut removed = self.removed_rows.iter().peekable();
        (0..self.rows_in)
            .filter(|i| {
                if removed.peek() == Some(&i) {
                    removed.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedModel {
    pub config: FitConfig,
    pub tree: RegressionTree,
    pub segments: Vec<Segment>,
    pub report: FitReport,
    /// Column encoding used to build the training matrix, when known.
    pub schema: Option<Schema>,
}

fn response_std(y: &[f64], mean: f64) -> f64 {
    (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64).sqrt()
}

fn to_mat(data: &Dataset) -> Mat<f64> {
    Mat::from_fn(data.n_rows(), data.n_features(), |i, j| data.value(i, j))
}

fn fit_leaf(data: &Dataset, config: &FitConfig) -> Result<(Option<Scaler>, LeafModel)> {
    let y = data.response();
    match config.leaf_method {
        LeafMethod::Constant => Ok((None, LeafModel::Constant(fit_constant(y)?))),
        LeafMethod::Linear => {
            let scaler = Scaler::fit(data)?;
            let x = to_mat(&scaler.apply(data)?);
            let model = fit_ols(x.as_ref(), y, config.ridge_eps)?;
            Ok((Some(scaler), LeafModel::Linear(model)))
        }
        LeafMethod::Gp => {
            let scaler = Scaler::fit(data)?;
            let x = to_mat(&scaler.apply(data)?);
            let model = fit_gp(x.as_ref(), y, &config.gp)?;
            Ok((Some(scaler), LeafModel::Gp(model)))
        }
    }
}

/// Fits the full segmented model on `train`.
pub fn fit_segmented(train: &Dataset, config: &FitConfig) -> Result<SegmentedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if config.leaf_size > train.n_rows() {
        return Err(Error::InvalidLeafSize {
            leaf_size: config.leaf_size,
            n_rows: train.n_rows(),
        });
    }

    let (data, removed_rows) = match &config.outliers {
        Some(o) if o.contamination > 0.0 => {
            let forest = IsolationForest::fit(train, o.n_trees, o.subsample, config.seed)?;
            let outcome = filter_outliers(train, &forest, o.contamination)?;
            let mut removed = outcome.removed_rows;
            removed.sort_unstable();
            (outcome.kept, removed)
        }
        _ => (train.clone(), Vec::new()),
    };
    if config.leaf_size > data.n_rows() {
        return Err(Error::InvalidLeafSize {
            leaf_size: config.leaf_size,
            n_rows: data.n_rows(),
        });
    }

    let tree = RegressionTree::fit(&data, config.leaf_size)?;
    let leaves = tree.leaves();
    let fitted: Vec<Result<Segment>> = leaves
        .par_iter()
        .map(|leaf| {
            let rows = data.select(&leaf.row_indices);
            let y = rows.response();
            let std = response_std(y, leaf.mean_response);
            let (scaler, model, status) = match fit_leaf(&rows, config) {
                Ok((scaler, model)) => (scaler, model, LeafStatus::Fitted),
                Err(e) if config.allow_fallback => (
                    None,
                    LeafModel::Constant(ConstantModel {
                        mean: leaf.mean_response,
                    }),
                    LeafStatus::Fallback { reason: e.to_string() },
                ),
                Err(e) => return Err(e),
            };
            Ok(Segment {
                segment_id: leaf.segment_id,
                count: leaf.count(),
                mean_response: leaf.mean_response,
                response_std: std,
                scaler,
                model,
                status,
            })
        })
        .collect();
    let mut segments = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    segments.sort_by_key(|s| s.segment_id);
    let fallbacks = segments
        .iter()
        .filter(|s| matches!(s.status, LeafStatus::Fallback { .. }))
        .count();

    Ok(SegmentedModel {
        config: config.clone(),
        report: FitReport {
            rows_in: train.n_rows(),
            removed_rows,
            n_leaves: tree.n_leaves,
            fallbacks,
        },
        tree,
        segments,
        schema: None,
    })
}

impl SegmentedModel {
    pub fn n_features(&self) -> usize {
        self.tree.n_features()
    }

    pub fn segment(&self, segment_id: usize) -> Result<&Segment> {
        self.segments
            .get(segment_id)
            .filter(|s| s.segment_id == segment_id)
            .ok_or(Error::UnknownSegment(segment_id))
    }

    /// Segment id and prediction for one record.
    pub fn predict_with_segment(&self, x: &[f64]) -> Result<(usize, f64)> {
        let id = self.tree.assign_leaf(x)?;
        let seg = self.segment(id)?;
        let value = match &seg.scaler {
            Some(scaler) => {
                let mut row = x.to_vec();
                scaler.transform_row(&mut row);
                seg.model.predict(&row)?
            }
            None => seg.model.predict(x)?,
        };
        Ok((id, value))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_with_segment(x).map(|(_, v)| v)
    }

    pub fn predict_batch(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: data.n_features(),
            });
        }
        (0..data.n_rows()).into_par_iter().map(|i| self.predict(data.row(i))).collect()
    }

    pub fn predict_batch_with_segments(&self, data: &Dataset) -> Result<Vec<(usize, f64)>> {
        if data.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: data.n_features(),
            });
        }
        (0..data.n_rows())
            .into_par_iter()
            .map(|i| self.predict_with_segment(data.row(i)))
            .collect()
    }

    /// Per-leaf status lines, one per segment.
    pub fn report_text(&self) -> String {
        let mut out = format!(
            "leaves={} method={} rows_in={} rows_used={} outliers_removed={} fallbacks={}\n",
            self.report.n_leaves,
            self.config.leaf_method,
            self.report.rows_in,
            self.report.rows_used(),
            self.report.removed_rows.len(),
            self.report.fallbacks
        );
        for s in &self.segments {
            let status = match &s.status {
                LeafStatus::Fitted => "fitted".to_string(),
                LeafStatus::Fallback { reason } => format!("fallback ({reason})"),
            };
            out.push_str(&format!(
                "segment {:>4}  rows={:<6} mean={:<12.6} model={:<8} {}\n",
                s.segment_id,
                s.count,
                s.mean_response,
                s.model.kind(),
                status
            ));
        }
        out
    }
}
