//! Error metrics, leaf-size sweeps, segment summaries and the outlier
//! ablation.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cart::RegressionTree;
use crate::dataset::{Dataset, SplitPair};
use crate::error::{Error, Result};
use crate::pipeline::{fit_segmented, FitConfig, LeafMethod, OutlierConfig, SegmentedModel};

pub const DEFAULT_GRID: [usize; 10] = [10, 20, 40, 70, 100, 200, 400, 700, 1000, 2000];

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("rmse input"));
    }
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// The default grid with sizes above `n_train` dropped.
pub fn default_grid(n_train: usize) -> Vec<usize> {
    DEFAULT_GRID.iter().copied().filter(|&l| l <= n_train).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    TreeOnly,
    FullModel,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::TreeOnly => "tree_only",
            SweepKind::FullModel => "full_model",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub leaf_size: usize,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub n_leaves: usize,
    pub fit_seconds: f64,
    /// Training rows before outlier filtering.
    pub n_train: usize,
    /// Training rows the model was fit on (and train_rmse measured on).
    pub n_train_used: usize,
    pub fallbacks: usize,
}

impl SweepRow {
    pub fn gap(&self) -> f64 {
        self.test_rmse - self.train_rmse
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub dataset: String,
    pub config: Option<FitConfig>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Row with the lowest test RMSE (first on ties).
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if b.test_rmse <= r.test_rmse => Some(b),
                _ => Some(r),
            })
    }

    pub fn row(&self, leaf_size: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.leaf_size == leaf_size)
    }

    pub fn to_csv_string(&self) -> String {
        let best = self.best().map(|r| r.leaf_size);
        let mut out = String::from(
            "leaf_size,train_rmse,test_rmse,n_leaves,fit_seconds,n_train,n_train_used,fallbacks,best\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.leaf_size,
                r.train_rmse,
                r.test_rmse,
                r.n_leaves,
                r.fit_seconds,
                r.n_train,
                r.n_train_used,
                r.fallbacks,
                u8::from(Some(r.leaf_size) == best)
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Fixed-width table: dataset, method, leaf size, RMSEs.
    pub fn table(&self) -> String {
        let method = self
            .config
            .as_ref()
            .map(|c| c.leaf_method.as_str())
            .unwrap_or("tree");
        let best = self.best().map(|r| r.leaf_size);
        let mut out = format!(
            "{:<20} {:<10} {:>9} {:>11} {:>11} {:>8} {:>9}\n",
            "dataset", "method", "leaf_size", "train_rmse", "test_rmse", "leaves", "seconds"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<20} {:<10} {:>9} {:>11.4} {:>11.4} {:>8} {:>9.3}{}",
                self.dataset,
                method,
                r.leaf_size,
                r.train_rmse,
                r.test_rmse,
                r.n_leaves,
                r.fit_seconds,
                if Some(r.leaf_size) == best { "  *" } else { "" }
            );
        }
        out
    }
}

fn check_grid(leaf_sizes: &[usize], n_train: usize) -> Result<()> {
    if leaf_sizes.is_empty() {
        return Err(Error::Empty("leaf size grid"));
    }
    if leaf_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("leaf sizes must be strictly increasing".into()));
    }
    if let Some(&bad) = leaf_sizes.iter().find(|&&l| l == 0 || l > n_train) {
        return Err(Error::InvalidLeafSize {
            leaf_size: bad,
            n_rows: n_train,
        });
    }
    Ok(())
}

fn tree_rmse(tree: &RegressionTree, data: &Dataset) -> Result<f64> {
    let pred = data.rows().map(|x| tree.predict_mean(x)).collect::<Result<Vec<_>>>()?;
    rmse(&pred, data.response())
}

/// Plain CART (constant leaves) at each leaf size.
pub fn tree_generalization_sweep(split: &SplitPair, leaf_sizes: &[usize], dataset: &str) -> Result<SweepReport> {
    let n = split.train.n_rows();
    check_grid(leaf_sizes, n)?;
    let mut rows = Vec::with_capacity(leaf_sizes.len());
    for &leaf_size in leaf_sizes {
        let start = Instant::now();
        let tree = RegressionTree::fit(&split.train, leaf_size)?;
        let fit_seconds = start.elapsed().as_secs_f64();
        rows.push(SweepRow {
            leaf_size,
            train_rmse: tree_rmse(&tree, &split.train)?,
            test_rmse: tree_rmse(&tree, &split.test)?,
            n_leaves: tree.n_leaves,
            fit_seconds,
            n_train: n,
            n_train_used: n,
            fallbacks: 0,
        });
    }
    Ok(SweepReport {
        kind: SweepKind::TreeOnly,
        dataset: dataset.to_string(),
        config: None,
        rows,
    })
}

/// Train and test RMSE of a fitted model; train error is measured on the rows
/// that survived outlier filtering.
pub fn model_errors(model: &SegmentedModel, split: &SplitPair) -> Result<(f64, f64)> {
    let used = if model.report.removed_rows.is_empty() {
        None
    } else {
        Some(split.train.select(&model.report.kept_rows()))
    };
    let train = used.as_ref().unwrap_or(&split.train);
    let train_rmse = rmse(&model.predict_batch(train)?, train.response())?;
    let test_rmse = rmse(&model.predict_batch(&split.test)?, split.test.response())?;
    Ok((train_rmse, test_rmse))
}

/// Full segmented model at each leaf size; `template.leaf_size` is ignored.
pub fn model_generalization_sweep(
    split: &SplitPair,
    leaf_sizes: &[usize],
    template: &FitConfig,
    dataset: &str,
) -> Result<SweepReport> {
    let n = split.train.n_rows();
    check_grid(leaf_sizes, n)?;
    let mut rows = Vec::with_capacity(leaf_sizes.len());
    for &leaf_size in leaf_sizes {
        let config = FitConfig {
            leaf_size,
            ..template.clone()
        };
        let start = Instant::now();
        let model = fit_segmented(&split.train, &config)?;
        let fit_seconds = start.elapsed().as_secs_f64();
        let (train_rmse, test_rmse) = model_errors(&model, split)?;
        rows.push(SweepRow {
            leaf_size,
            train_rmse,
            test_rmse,
            n_leaves: model.report.n_leaves,
            fit_seconds,
            n_train: n,
            n_train_used: model.report.rows_used(),
            fallbacks: model.report.fallbacks,
        });
    }
    Ok(SweepReport {
        kind: SweepKind::FullModel,
        dataset: dataset.to_string(),
        config: Some(template.clone()),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummaryRow {
    pub segment_id: usize,
    pub count: usize,
    pub mean_response: f64,
    pub response_std: f64,
    pub profile: String,
}

/// Routes every row of `data` and aggregates the response per segment,
/// sorted by mean response. Segments that receive no rows are omitted.
pub fn segment_summary(model: &SegmentedModel, data: &Dataset) -> Result<Vec<SegmentSummaryRow>> {
    if data.n_features() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: data.n_features(),
        });
    }
    let n_seg = model.segments.len();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); n_seg];
    for (x, y) in data.rows().zip(data.response()) {
        members[model.tree.assign_leaf(x)?].push(*y);
    }
    let mut out = Vec::new();
    for (id, ys) in members.into_iter().enumerate() {
        if ys.is_empty() {
            continue;
        }
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / ys.len() as f64;
        out.push(SegmentSummaryRow {
            segment_id: id,
            count: ys.len(),
            mean_response: mean,
            response_std: var.sqrt(),
            profile: model.tree.segment_profile(id)?.rule_text(),
        });
    }
    out.sort_by(|a, b| a.mean_response.total_cmp(&b.mean_response).then(a.segment_id.cmp(&b.segment_id)));
    Ok(out)
}

pub fn summary_csv(rows: &[SegmentSummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["segment_id", "count", "mean_response", "response_std", "profile"]);
    for r in rows {
        let _ = w.write_record([
            r.segment_id.to_string(),
            r.count.to_string(),
            r.mean_response.to_string(),
            r.response_std.to_string(),
            r.profile.clone(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub leaf_method: LeafMethod,
    pub leaf_size: usize,
    pub outliers: OutlierConfig,
    pub off_train_rmse: f64,
    pub off_test_rmse: f64,
    pub on_train_rmse: f64,
    pub on_test_rmse: f64,
    pub removed: usize,
}

impl AblationReport {
    pub fn text(&self) -> String {
        format!(
            "method={} leaf_size={} contamination={} removed={}\n\
             without_filter train_rmse={:.6} test_rmse={:.6}\n\
             with_filter    train_rmse={:.6} test_rmse={:.6}\n",
            self.leaf_method,
            self.leaf_size,
            self.outliers.contamination,
            self.removed,
            self.off_train_rmse,
            self.off_test_rmse,
            self.on_train_rmse,
            self.on_test_rmse
        )
    }
}

/// Fits the same configuration with and without outlier filtering. Uses the
/// config's outlier settings for the filtered arm, or the defaults.
pub fn ablation_outliers(split: &SplitPair, config: &FitConfig) -> Result<AblationReport> {
    let outliers = config.outliers.unwrap_or_default();
    let off = fit_segmented(
        &split.train,
        &FitConfig {
            outliers: None,
            ..config.clone()
        },
    )?;
    let on = fit_segmented(
        &split.train,
        &FitConfig {
            outliers: Some(outliers),
            ..config.clone()
        },
    )?;
    let (off_train_rmse, off_test_rmse) = model_errors(&off, split)?;
    let (on_train_rmse, on_test_rmse) = model_errors(&on, split)?;
    Ok(AblationReport {
        leaf_method: config.leaf_method,
        leaf_size: config.leaf_size,
        outliers,
        off_train_rmse,
        off_test_rmse,
        on_train_rmse,
        on_test_rmse,
        removed: on.report.removed_rows.len(),
    })
}

/// Reads one prediction per test row (column `prediction` if present,
/// otherwise the first column) and scores it against `test`.
pub fn compare_external(pred_file: impl AsRef<Path>, test: &Dataset) -> Result<f64> {
    let path = pred_file.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let column = reader
        .headers()?
        .iter()
        .position(|h| h.trim() == "prediction")
        .unwrap_or(0);
    let mut pred = Vec::new();
    for record in reader.records() {
        let record = record?;
        let cell = record.get(column).unwrap_or("").trim();
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("unparseable prediction `{cell}`")))?;
        pred.push(v);
    }
    if pred.len() != test.n_rows() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: test.n_rows(),
        });
    }
    rmse(&pred, test.response())
}
