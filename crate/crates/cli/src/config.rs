//! Declarative run configuration. Every field has an explicit default so the
//! resolved echo written next to each output is a complete recipe.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use treeseg::evaluation::DEFAULT_GRID;
use treeseg::leaf_models::GpSettings;
use treeseg::{ColumnSpec, FitConfig, LeafMethod, OutlierConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub outliers: OutlierSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default = "default_tag")]
    pub tag: String,
    pub columns: Vec<ColumnSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train_fraction: 0.7,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub leaf_size: usize,
    pub leaf_method: LeafMethod,
    pub seed: u64,
    pub ridge_eps: f64,
    pub gp_max_iters: usize,
    pub allow_fallback: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            leaf_size: 100,
            leaf_method: LeafMethod::Linear,
            seed: 42,
            ridge_eps: 0.0,
            gp_max_iters: GpSettings::default().max_iters,
            allow_fallback: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutlierSection {
    pub enabled: bool,
    pub contamination: f64,
    pub n_trees: usize,
    pub subsample: usize,
}

impl Default for OutlierSection {
    fn default() -> Self {
        let d = OutlierConfig::default();
        OutlierSection {
            enabled: false,
            contamination: d.contamination,
            n_trees: d.n_trees,
            subsample: d.subsample,
        }
    }
}

impl OutlierSection {
    pub fn forest(&self) -> OutlierConfig {
        OutlierConfig {
            contamination: self.contamination,
            n_trees: self.n_trees,
            subsample: self.subsample,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Sizes above the training row count are dropped at run time.
    pub grid: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            grid: DEFAULT_GRID.to_vec(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_tag() -> String {
    "dataset".to_string()
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub tag: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub leaf_size: Option<usize>,
    pub method: Option<LeafMethod>,
    pub seed: Option<u64>,
    pub split_seed: Option<u64>,
    pub train_fraction: Option<f64>,
    pub contamination: Option<f64>,
    pub no_outliers: bool,
    pub grid: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.data {
            self.data.path = p.clone();
        }
        if let Some(t) = &o.tag {
            self.data.tag = t.clone();
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(l) = o.leaf_size {
            self.fit.leaf_size = l;
        }
        if let Some(m) = o.method {
            self.fit.leaf_method = m;
        }
        if let Some(s) = o.seed {
            self.fit.seed = s;
        }
        if let Some(s) = o.split_seed {
            self.split.seed = s;
        }
        if let Some(f) = o.train_fraction {
            self.split.train_fraction = f;
        }
        if let Some(c) = o.contamination {
            self.outliers.enabled = c > 0.0;
            self.outliers.contamination = c;
        }
        if o.no_outliers {
            self.outliers.enabled = false;
        }
        if let Some(g) = &o.grid {
            self.sweep.grid = g.clone();
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        let f = &self.fit;
        FitConfig {
            leaf_size: f.leaf_size,
            leaf_method: f.leaf_method,
            outliers: self.outliers.enabled.then(|| self.outliers.forest()),
            seed: f.seed,
            ridge_eps: f.ridge_eps,
            gp: GpSettings {
                max_iters: f.gp_max_iters,
                init: None,
            },
            allow_fallback: f.allow_fallback,
        }
    }

    /// Checks everything that can be checked without reading the data.
    pub fn validate(&self) -> Result<()> {
        if self.data.columns.is_empty() {
            bail!("data.columns is empty");
        }
        let split = self.split.train_fraction;
        if !(split > 0.0 && split <= 1.0) {
            bail!("split.train_fraction must lie in (0, 1], got {split}");
        }
        if self.fit.gp_max_iters == 0 && self.fit.leaf_method == LeafMethod::Gp {
            bail!("fit.gp_max_iters must be at least 1");
        }
        if self.sweep.grid.is_empty() {
            bail!("sweep.grid is empty");
        }
        if self.sweep.grid.windows(2).any(|w| w[0] >= w[1]) {
            bail!("sweep.grid must be strictly increasing");
        }
        let mut fit = self.fit_config();
        fit.outliers = Some(self.outliers.forest());
        fit.validate()?;
        if !self.data.path.is_file() {
            bail!("dataset {} does not exist", self.data.path.display());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Writes the resolved configuration into the output directory.
    pub fn echo(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))?;
        let path = self.output_dir.join(name);
        std::fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
