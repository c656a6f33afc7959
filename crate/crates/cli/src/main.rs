mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use treeseg::dataset::{Loaded, SchemaColumn};
use treeseg::evaluation::{model_errors, rmse};
use treeseg::outlier::rows_to_remove;
use treeseg::{
    fit_segmented, load_csv, load_model, model_generalization_sweep, save_model, train_test_split,
    tree_generalization_sweep, Dataset, IsolationForest, LeafMethod, Schema, SegmentedModel, SplitPair, Transform,
};

use crate::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "treeseg", version, about = "Tree-segmented regression")]
struct Cli {
    /// Worker threads for tree, leaf and forest work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a segmented model on the training split and save it.
    Fit {
        #[command(flatten)]
        run: RunArgs,
        /// Model file (default: <output_dir>/<tag>_model.json).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Append prediction and segment_id columns to a CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output CSV (default: standard output).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train and test RMSE across a grid of leaf sizes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = SweepArg::Model)]
        kind: SweepArg,
    },
    /// Print the rule path and response statistics of segments.
    Profile {
        #[arg(long)]
        model: PathBuf,
        #[arg(required_unless_present = "all", conflicts_with = "all")]
        segment: Option<usize>,
        #[arg(long)]
        all: bool,
    },
    /// Score the training split with an isolation forest.
    Outliers {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Tree,
    Model,
}

impl SweepArg {
    fn as_str(self) -> &'static str {
        match self {
            SweepArg::Tree => "tree",
            SweepArg::Model => "model",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    leaf_size: Option<usize>,
    /// constant, linear or gp.
    #[arg(long)]
    method: Option<LeafMethod>,
    /// Seed for the outlier forest.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Fraction of training rows to drop as outliers; 0 disables filtering.
    #[arg(long, conflicts_with = "no_outliers")]
    contamination: Option<f64>,
    #[arg(long)]
    no_outliers: bool,
    /// Comma-separated leaf sizes for sweeps.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::from_file(&self.config)?;
        config.apply(&Overrides {
            data: self.data.clone(),
            tag: self.tag.clone(),
            output_dir: self.output_dir.clone(),
            leaf_size: self.leaf_size,
            method: self.method,
            seed: self.seed,
            split_seed: self.split_seed,
            train_fraction: self.train_fraction,
            contamination: self.contamination,
            no_outliers: self.no_outliers,
            grid: self.grid.clone(),
        });
        config.validate()?;
        Ok(config)
    }
}

/// The ingested dataset split as configured. A train fraction of 1 keeps
/// every row for training and leaves the test side empty.
struct Prepared {
    loaded: Loaded,
    train: Dataset,
    train_rows: Vec<usize>,
    split: Option<SplitPair>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let loaded = load_csv(&config.data.path, &config.data.columns)
        .with_context(|| format!("loading {}", config.data.path.display()))?;
    eprintln!("{}", loaded.report);
    if config.split.train_fraction >= 1.0 {
        let train = loaded.data.clone();
        let train_rows = (0..train.n_rows()).collect();
        return Ok(Prepared {
            loaded,
            train,
            train_rows,
            split: None,
        });
    }
    let split = train_test_split(&loaded.data, config.split.train_fraction, config.split.seed)?;
    Ok(Prepared {
        train: split.train.clone(),
        train_rows: split.train_rows.clone(),
        loaded,
        split: Some(split),
    })
}

fn cmd_fit(run: &RunArgs, model_path: Option<PathBuf>) -> Result<()> {
    let config = run.resolve()?;
    let prepared = prepare(&config)?;
    config.echo("resolved_config.toml")?;
    let fit = config.fit_config();
    let mut model = fit_segmented(&prepared.train, &fit)?;
    model.schema = Some(prepared.loaded.schema.clone());

    let mut report = model.report_text();
    let (train_rmse, test_rmse) = match &prepared.split {
        Some(split) => {
            let (a, b) = model_errors(&model, split)?;
            (a, Some(b))
        }
        None => {
            let used = prepared.train.select(&model.report.kept_rows());
            (rmse(&model.predict_batch(&used)?, used.response())?, None)
        }
    };
    let _ = writeln!(report, "train_rmse={train_rmse}");
    if let Some(t) = test_rmse {
        let _ = writeln!(report, "test_rmse={t}");
    }

    let path = model_path.unwrap_or_else(|| config.output_dir.join(format!("{}_model.json", config.data.tag)));
    save_model(&model, &path).with_context(|| format!("saving {}", path.display()))?;
    let report_path = config.output_dir.join(format!("{}_fit_report.txt", config.data.tag));
    std::fs::write(&report_path, &report).with_context(|| format!("writing {}", report_path.display()))?;
    print!("{report}");
    eprintln!("model written to {}", path.display());
    Ok(())
}

/// Schema used to read prediction inputs; models saved without one read
/// their tree's feature names as plain numeric columns.
fn input_schema(model: &SegmentedModel) -> Schema {
    model.schema.clone().unwrap_or_else(|| Schema {
        columns: model
            .tree
            .feature_names
            .iter()
            .map(|name| SchemaColumn::Numeric {
                name: name.clone(),
                transform: Transform::None,
            })
            .collect(),
        target: String::new(),
        target_transform: Transform::None,
    })
}

fn cmd_predict(model_path: &Path, input: &Path, output: Option<&Path>) -> Result<()> {
    let model = load_model(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let schema = input_schema(&model);
    if schema.n_features() != model.n_features() {
        bail!(
            "model schema encodes {} features but the tree expects {}",
            schema.n_features(),
            model.n_features()
        );
    }
    let mut reader = csv::Reader::from_path(input).with_context(|| format!("opening {}", input.display()))?;
    let header = reader.headers()?.clone();
    let positions = schema.locate(&header)?;

    let sink: Box<dyn Write> = match output {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    let mut out_header = header.clone();
    out_header.push_field("prediction");
    out_header.push_field("segment_id");
    writer.write_record(&out_header)?;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let x = schema
            .encode_record(&positions, &record)
            .with_context(|| format!("input row {}", i + 1))?;
        let (segment, value) = model.predict_with_segment(&x)?;
        let mut row = record.clone();
        row.push_field(&value.to_string());
        row.push_field(&segment.to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn cmd_sweep(run: &RunArgs, kind: SweepArg) -> Result<()> {
    let config = run.resolve()?;
    let prepared = prepare(&config)?;
    let Some(split) = &prepared.split else {
        bail!("sweeps need a test split; set split.train_fraction below 1");
    };
    let n_train = split.train.n_rows();
    let grid: Vec<usize> = config.sweep.grid.iter().copied().filter(|&l| l <= n_train).collect();
    if grid.len() < config.sweep.grid.len() {
        eprintln!("dropped leaf sizes above the {n_train} training rows");
    }
    if grid.is_empty() {
        bail!("no leaf size in the grid fits {n_train} training rows");
    }
    config.echo("resolved_config.toml")?;
    let tag = &config.data.tag;
    let report = match kind {
        SweepArg::Tree => tree_generalization_sweep(split, &grid, tag)?,
        SweepArg::Model => model_generalization_sweep(split, &grid, &config.fit_config(), tag)?,
    };
    let path = config.output_dir.join(format!("{tag}_{}.csv", kind.as_str()));
    report.write_csv(&path)?;
    print!("{}", report.table());
    eprintln!("sweep written to {}", path.display());
    Ok(())
}

fn cmd_profile(model_path: &Path, segment: Option<usize>, all: bool) -> Result<()> {
    let model = load_model(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let mut chosen: Vec<_> = if all {
        model.segments.iter().collect()
    } else {
        let id = segment.context("give a segment id or --all")?;
        vec![model.segment(id)?]
    };
    chosen.sort_by(|a, b| a.mean_response.total_cmp(&b.mean_response).then(a.segment_id.cmp(&b.segment_id)));
    let mut out = String::new();
    for s in chosen {
        let profile = model.tree.segment_profile(s.segment_id)?;
        let _ = writeln!(
            out,
            "segment {} count={} mean={} std={}",
            s.segment_id, s.count, s.mean_response, s.response_std
        );
        for c in &profile.conditions {
            let _ = writeln!(out, "  {c}");
        }
    }
    print!("{out}");
    Ok(())
}

fn cmd_outliers(run: &RunArgs) -> Result<()> {
    let config = run.resolve()?;
    let prepared = prepare(&config)?;
    config.echo("resolved_config.toml")?;
    let o = &config.outliers;
    let forest = IsolationForest::fit(&prepared.train, o.n_trees, o.subsample, config.fit.seed)?;
    let scores = forest.score_all(&prepared.train)?;
    let contamination = if o.enabled { o.contamination } else { 0.0 };
    let removed = rows_to_remove(&scores, contamination)?;
    let mut flag = vec![false; scores.len()];
    removed.iter().for_each(|&r| flag[r] = true);

    let path = config.output_dir.join(format!("{}_outliers.csv", config.data.tag));
    let mut writer = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["row_index", "score", "removed"])?;
    for (i, score) in scores.iter().enumerate() {
        writer.write_record([
            prepared.train_rows[i].to_string(),
            score.to_string(),
            u8::from(flag[i]).to_string(),
        ])?;
    }
    writer.flush()?;
    eprintln!(
        "scored {} rows, flagged {} at contamination {contamination}; written to {}",
        scores.len(),
        removed.len(),
        path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Fit { run, model } => cmd_fit(&run, model),
        Command::Predict { model, input, output } => cmd_predict(&model, &input, output.as_deref()),
        Command::Sweep { run, kind } => cmd_sweep(&run, kind),
        Command::Profile { model, segment, all } => cmd_profile(&model, segment, all),
        Command::Outliers { run } => cmd_outliers(&run),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
