//! Regression-tree segmentation with per-segment regressors.
//!
//! A CART tree splits the training data into leaf segments of at least
//! `leaf_size` rows; each segment then gets its own constant, least-squares
//! or Gaussian-process model. Training rows can be screened with an
//! isolation forest first.
//!
//! ```no_run
//! use treeseg::{fit_segmented, load_csv, train_test_split, ColumnSpec, FitConfig, LeafMethod};
//!
//! let specs = [
//!     ColumnSpec::numeric("AT"),
//!     ColumnSpec::numeric("V"),
//!     ColumnSpec::numeric("AP"),
//!     ColumnSpec::numeric("RH"),
//!     ColumnSpec::target("PE"),
//! ];
//! let data = load_csv("data/ccpp.csv", &specs)?.data;
//! let split = train_test_split(&data, 0.7, 42)?;
//! let model = fit_segmented(&split.train, &FitConfig::new(1000, LeafMethod::Gp))?;
//! let pred = model.predict_batch(&split.test)?;
//! # Ok::<(), treeseg::Error>(())
//! ```

pub mod cart;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod leaf_models;
pub mod outlier;
pub mod persistence;
pub mod pipeline;

pub use cart::{build_tree, Profile, RegressionTree, SplitRule};
pub use dataset::{load_csv, train_test_split, ColumnKind, ColumnSpec, Dataset, Scaler, Schema, SplitPair, Transform};
pub use error::{Error, Result};
pub use evaluation::{
    ablation_outliers, compare_external, model_generalization_sweep, rmse, segment_summary, tree_generalization_sweep,
    SweepKind, SweepReport,
};
pub use leaf_models::{GpSettings, KernelParams, LeafModel};
pub use outlier::{filter_outliers, fit_forest, IsolationForest};
pub use persistence::{load_model, save_model};
pub use pipeline::{fit_segmented, FitConfig, LeafMethod, OutlierConfig, SegmentedModel};
