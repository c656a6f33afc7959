//! Tabular ingestion, one-hot encoding, train/test splitting and z-score scaling.
//!
//! Everything downstream consumes a [`Dataset`]: a dense row-major feature
//! matrix plus a response vector. Categorical source columns are expanded into
//! blocks of 0/1 indicator columns, so the tree only ever sees numeric
//! thresholds (an indicator split at 0.5 is a category-membership split).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Target,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    Log,
}

impl Transform {
    fn apply(self, column: &str, value: f64) -> Result<f64> {
        match self {
            Transform::None => Ok(value),
            Transform::Log if value > 0.0 => Ok(value.ln()),
            Transform::Log => Err(Error::NonPositiveLog {
                column: column.to_string(),
                value,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub transform: Transform,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            transform: Transform::None,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            transform: Transform::None,
        }
    }

    pub fn target(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Target,
            transform: Transform::None,
        }
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }
}

/// One source column as it maps onto encoded feature columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemaColumn {
    Numeric { name: String, transform: Transform },
    Categorical { name: String, levels: Vec<String> },
}

impl SchemaColumn {
    pub fn source_name(&self) -> &str {
        match self {
            SchemaColumn::Numeric { name, .. } | SchemaColumn::Categorical { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            SchemaColumn::Numeric { .. } => 1,
            SchemaColumn::Categorical { levels, .. } => levels.len(),
        }
    }
}

/// How raw CSV columns map onto the feature matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<SchemaColumn>,
    pub target: String,
    pub target_transform: Transform,
}

impl Schema {
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for col in &self.columns {
            match col {
                SchemaColumn::Numeric { name, .. } => names.push(name.clone()),
                SchemaColumn::Categorical { name, levels } => {
                    names.extend(levels.iter().map(|l| format!("{name}={l}")))
                }
            }
        }
        names
    }

    pub fn n_features(&self) -> usize {
        self.columns.iter().map(SchemaColumn::width).sum()
    }

    /// Resolves the header position of every source column.
    pub fn locate(&self, header: &csv::StringRecord) -> Result<Vec<usize>> {
        let index = header_index(header);
        self.columns
            .iter()
            .map(|c| {
                index
                    .get(c.source_name())
                    .copied()
                    .ok_or_else(|| Error::MissingColumn(c.source_name().to_string()))
            })
            .collect()
    }

    /// Encodes one raw record into a feature vector. Categorical levels not
    /// seen at fit time encode as an all-zero indicator block.
    pub fn encode_record(&self, positions: &[usize], record: &csv::StringRecord) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n_features());
        for (col, &pos) in self.columns.iter().zip(positions) {
            let cell = record.get(pos).unwrap_or("").trim();
            match col {
                SchemaColumn::Numeric { name, transform } => {
                    let v = parse_cell(cell).ok_or_else(|| {
                        Error::InvalidParameter(format!("unparseable value `{cell}` in column `{name}`"))
                    })?;
                    out.push(transform.apply(name, v)?);
                }
                SchemaColumn::Categorical { levels, .. } => {
                    out.extend(levels.iter().map(|l| if l == cell { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(out)
    }
}

/// What happened during ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub categorical_columns: usize,
    pub encoded_features: usize,
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows_read = {}", self.rows_read)?;
        writeln!(f, "rows_dropped = {}", self.rows_dropped)?;
        writeln!(f, "rows_kept = {}", self.rows_read - self.rows_dropped)?;
        writeln!(f, "categorical_columns = {}", self.categorical_columns)?;
        write!(f, "encoded_features = {}", self.encoded_features)
    }
}

/// Dense numeric dataset, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    response: Vec<f64>,
    n_features: usize,
    feature_names: Vec<String>,
    target_name: String,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        response: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        if features.len() != response.len() * n_features {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: response.len() * n_features,
            });
        }
        Ok(Self {
            features,
            response,
            n_features,
            feature_names,
            target_name: target_name.into(),
        })
    }

    /// Builds a dataset from row vectors with generated names `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Self::new(rows.concat(), response, names, "y")
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features + j]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut response = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            response.push(self.response[i]);
        }
        Dataset {
            features,
            response,
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Same rows, features replaced (used by scaling).
    fn with_features(&self, features: Vec<f64>) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }

    /// Writes features then target, one header row, full-precision numbers.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header)?;
        for (row, y) in self.rows().zip(&self.response) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// A loaded dataset together with its encoding and the ingestion report.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub data: Dataset,
    pub schema: Schema,
    pub report: IngestReport,
}

fn header_index(header: &csv::StringRecord) -> HashMap<&str, usize> {
    header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect()
}

fn parse_cell(cell: &str) -> Option<f64> {
    if cell.is_empty() {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headered CSV, keeps the columns named in `specs`, drops rows with
/// missing or unparseable cells and one-hot encodes categorical columns.
pub fn load_csv(path: impl AsRef<Path>, specs: &[ColumnSpec]) -> Result<Loaded> {
    let path = path.as_ref();
    let n_targets = specs.iter().filter(|s| s.kind == ColumnKind::Target).count();
    if n_targets != 1 {
        return Err(Error::TargetCount(n_targets));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header = reader.headers()?.clone();
    let index = header_index(&header);
    let positions: Vec<usize> = specs
        .iter()
        .map(|s| {
            index
                .get(s.name.as_str())
                .copied()
                .ok_or_else(|| Error::MissingColumn(s.name.clone()))
        })
        .collect::<Result<_>>()?;

    // Raw pass: numeric cells parsed, categorical cells kept as strings.
    let mut numeric_rows: Vec<Vec<f64>> = Vec::new();
    let mut categorical_rows: Vec<Vec<String>> = Vec::new();
    let mut rows_read = 0;
    for record in reader.records() {
        let record = record?;
        rows_read += 1;
        let mut nums = Vec::with_capacity(specs.len());
        let mut cats = Vec::new();
        let mut ok = true;
        for (spec, &pos) in specs.iter().zip(&positions) {
            let cell = record.get(pos).unwrap_or("").trim();
            match spec.kind {
                ColumnKind::Categorical => {
                    if cell.is_empty() {
                        ok = false;
                        break;
                    }
                    cats.push(cell.to_string());
                }
                ColumnKind::Numeric | ColumnKind::Target => match parse_cell(cell) {
                    Some(v) => nums.push(v),
                    None => {
                        ok = false;
                        break;
                    }
                },
            }
        }
        if ok {
            numeric_rows.push(nums);
            categorical_rows.push(cats);
        }
    }
    let rows_kept = numeric_rows.len();

    // Levels are learned from the kept rows, sorted for a stable layout.
    let mut cat_levels: Vec<Vec<String>> = Vec::new();
    let n_cat = specs.iter().filter(|s| s.kind == ColumnKind::Categorical).count();
    for c in 0..n_cat {
        let set: BTreeSet<&str> = categorical_rows.iter().map(|r| r[c].as_str()).collect();
        cat_levels.push(set.into_iter().map(str::to_string).collect());
    }

    let mut columns = Vec::new();
    let mut target = None;
    let mut cat_i = 0;
    for spec in specs {
        match spec.kind {
            ColumnKind::Numeric => columns.push(SchemaColumn::Numeric {
                name: spec.name.clone(),
                transform: spec.transform,
            }),
            ColumnKind::Categorical => {
                columns.push(SchemaColumn::Categorical {
                    name: spec.name.clone(),
                    levels: cat_levels[cat_i].clone(),
                });
                cat_i += 1;
            }
            ColumnKind::Target => target = Some(spec),
        }
    }
    let target = target.expect("target count checked");
    let schema = Schema {
        columns,
        target: target.name.clone(),
        target_transform: target.transform,
    };

    let d = schema.n_features();
    let mut features = Vec::with_capacity(rows_kept * d);
    let mut response = Vec::with_capacity(rows_kept);
    for (nums, cats) in numeric_rows.iter().zip(&categorical_rows) {
        let mut num_i = 0;
        let mut cat_i = 0;
        for spec in specs {
            match spec.kind {
                ColumnKind::Numeric => {
                    features.push(spec.transform.apply(&spec.name, nums[num_i])?);
                    num_i += 1;
                }
                ColumnKind::Categorical => {
                    let value = &cats[cat_i];
                    features.extend(
                        cat_levels[cat_i]
                            .iter()
                            .map(|l| if l == value { 1.0 } else { 0.0 }),
                    );
                    cat_i += 1;
                }
                ColumnKind::Target => {
                    response.push(spec.transform.apply(&spec.name, nums[num_i])?);
                    num_i += 1;
                }
            }
        }
    }

    let data = Dataset::new(features, response, schema.feature_names(), target.name.clone())?;
    let report = IngestReport {
        rows_read,
        rows_dropped: rows_read - rows_kept,
        categorical_columns: n_cat,
        encoded_features: d,
    };
    Ok(Loaded { data, schema, report })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    /// Source row indices, in the order they appear in `train` / `test`.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

/// Seeded uniform shuffle, then the first `round(fraction * N)` rows train.
pub fn train_test_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    let n = data.n_rows();
    let n_train = (train_fraction * n as f64).round() as usize;
    if !(train_fraction > 0.0 && train_fraction < 1.0) || n < 2 || n_train == 0 || n_train >= n {
        return Err(Error::InvalidSplit {
            fraction: train_fraction,
            n_rows: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test_rows = order.split_off(n_train);
    let train_rows = order;
    Ok(SplitPair {
        train: data.select(&train_rows),
        test: data.select(&test_rows),
        train_rows,
        test_rows,
        seed,
    })
}

/// Per-feature z-score parameters learned from a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation of each column.
    pub fn fit(train: &Dataset) -> Result<Scaler> {
        if train.is_empty() {
            return Err(Error::Empty("scaler training set"));
        }
        let n = train.n_rows() as f64;
        let d = train.n_features();
        let mut mean = vec![0.0; d];
        for row in train.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in train.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(Scaler { mean, std })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Scales one row in place; zero-variance columns pass through unchanged.
    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            if *s > 0.0 {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: data.n_features(),
            });
        }
        let mut features = data.features().to_vec();
        if self.n_features() > 0 {
            for row in features.chunks_mut(self.n_features()) {
                self.transform_row(row);
            }
        }
        Ok(data.with_features(features))
    }
}
