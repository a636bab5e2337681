//! Subcommands behind the `sparx` binary. Every command is a plain function
//! over a config struct so it can be driven from tests as well as the shell.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sparx::cluster::{cluster_counts_from_ratio, partition_mlp, KMeansConfig};
use sparx::dataset::{default_kernel_width, sample_neighborhood, Neighborhood, Table};
use sparx::evaluate::{anchor_seed, evaluate, EvalConfig, Method, ReportRow, CSV_HEADER, DEFAULT_RATIOS};
use sparx::explain::{
    export_dot, feature_attribution, prune_for_display, relevance_global, relevance_local, DEFAULT_TOP_K,
};
use sparx::metrics::{
    cognitive_complexity, fit_ridge_surrogate, global_io_unfaithfulness, local_io_for_class, local_io_unfaithfulness,
    structural_unfaithfulness, Substitute,
};
use sparx::model::argmax_class;
use sparx::qaf::{check_equivalence, final_strengths, translate_auto};
use sparx::sparsify::{build_clustered, Aggregation, LocalEstimator, KERNEL_NORMALIZATION};
use sparx::{Mlp, Seeds, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid or inconsistent arguments; exit code 2.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sparx::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(sparx::Error::Config(_)) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "sparx",
    version,
    about = "Sparsify MLPs and explain them as argumentation frameworks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a Relu MLP with a softmax head on a labelled CSV file.
    Train(TrainArgs),
    /// Cluster a model at one ratio and write its argumentation framework.
    Explain(ExplainArgs),
    /// Faithfulness of the clustered models over a grid of ratios and seeds.
    Evaluate(EvaluateArgs),
    /// Compare argument strengths with the forward pass on every data row.
    CheckEquivalence(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    pub label: String,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Fraction of rows held out for the reported F1 score.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Path of the weight JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Global,
    Local,
}

/// Command-line spelling of [`LocalEstimator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum EstimatorArg {
    #[default]
    LeastSquares,
    PerSample,
}

impl From<EstimatorArg> for LocalEstimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::LeastSquares => LocalEstimator::LeastSquares,
            EstimatorArg::PerSample => LocalEstimator::PerSample,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label column to ignore if present.
    #[arg(long, default_value = "label")]
    pub label: String,
    /// Compression ratio in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, value_enum, default_value_t = Mode::Global)]
    pub mode: Mode,
    /// Row index into the data file, or a comma-separated feature vector.
    #[arg(long)]
    pub anchor: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub kernel_width: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// How local edge weights are estimated from the neighbourhood.
    #[arg(long, value_enum, default_value_t = EstimatorArg::LeastSquares)]
    pub local_estimator: EstimatorArg,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Ridge regularization of the baseline surrogate (local mode).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Percentile of edge magnitudes hidden in the graph drawing.
    #[arg(long, default_value_t = 0.0)]
    pub prune: f64,
    #[arg(long)]
    pub no_baseline: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label: String,
    /// Compression ratios, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ratio: Vec<f64>,
    /// Root seeds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seed: Vec<u64>,
    /// Anchor row indices, comma separated; every row by default.
    #[arg(long, value_delimiter = ',')]
    pub anchor: Vec<usize>,
    #[arg(long)]
    pub kernel_width: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::LeastSquares)]
    pub local_estimator: EstimatorArg,
    #[arg(long)]
    pub no_baseline: bool,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label: String,
    /// Also check the globally clustered model at this ratio.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Train(a) => cmd_train(&a).map(|s| s.to_string()),
        Command::Explain(a) => cmd_explain(&a).map(|s| s.to_string()),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|s| s.to_string()),
        Command::CheckEquivalence(a) => cmd_check_equivalence(&a).map(|s| s.to_string()),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_headers(path: &Path) -> CliResult<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => usage(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(headers.iter().map(|h| h.trim().to_string()).collect())
}

/// Load `path`, dropping the label column when present, with columns
/// ordered as the model's features.
fn load_features(path: &Path, label: &str, mlp: &Mlp) -> CliResult<Table> {
    let headers = csv_headers(path)?;
    let label = headers.iter().any(|h| h == label).then_some(label);
    let table = Table::load_csv(path, label)?;
    if let Some(missing) = mlp.feature_names.iter().find(|f| !table.feature_names.contains(f)) {
        return Err(usage(format!(
            "{}: model feature '{missing}' is not a column",
            path.display()
        )));
    }
    if table.feature_names == mlp.feature_names {
        Ok(table)
    } else {
        Ok(table.select_features(&mlp.feature_names)?)
    }
}

fn check_ratio(ratio: f64) -> CliResult<()> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(usage(format!("--ratio must lie in [0, 1), got {ratio}")));
    }
    Ok(())
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

/// Macro-averaged F1 over the classes that occur in either vector.
pub fn macro_f1(truth: &[usize], predicted: &[usize]) -> f64 {
    let n = truth.iter().chain(predicted).max().map_or(0, |m| m + 1);
    let mut scores = Vec::new();
    for c in 0..n {
        let tp = truth.iter().zip(predicted).filter(|&(&t, &p)| t == c && p == c).count();
        let fp = truth.iter().zip(predicted).filter(|&(&t, &p)| t != c && p == c).count();
        let fn_ = truth.iter().zip(predicted).filter(|&(&t, &p)| t == c && p != c).count();
        if tp + fp + fn_ > 0 {
            scores.push(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
        }
    }
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

fn predictions(mlp: &Mlp, table: &Table) -> CliResult<Vec<usize>> {
    table.rows.iter().map(|x| Ok(argmax_class(&mlp.outputs(x)?))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub train_accuracy: f64,
    pub holdout_rows: usize,
    /// On the held-out rows, or the training rows when none are held out.
    pub f1: f64,
    pub seeds: Seeds,
}

impl std::fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let on = if self.holdout_rows > 0 {
            format!("holdout ({} rows)", self.holdout_rows)
        } else {
            "training rows".to_string()
        };
        write!(
            f,
            "training accuracy {:.4}\nF1 on {on} {:.4}",
            self.train_accuracy, self.f1
        )
    }
}

/// Train on standardized features, then fold the standardization into the
/// first layer so the written model reads raw features.
pub fn cmd_train(args: &TrainArgs) -> CliResult<TrainSummary> {
    if args.hidden.is_empty() || args.hidden.contains(&0) {
        return Err(usage("--hidden needs positive layer widths"));
    }
    if !(0.0..1.0).contains(&args.test_fraction) {
        return Err(usage("--test-fraction must lie in [0, 1)"));
    }
    if !(args.lr > 0.0 && args.lr.is_finite()) {
        return Err(usage("--lr must be positive"));
    }
    let headers = csv_headers(&args.data)?;
    if !headers.iter().any(|h| h == &args.label) {
        return Err(usage(format!(
            "{}: missing label column '{}'",
            args.data.display(),
            args.label
        )));
    }
    let table = Table::load_csv(&args.data, Some(&args.label))?;
    if table.is_empty() {
        return Err(sparx::Error::EmptyDataset.into());
    }
    let seeds = Seeds::from_root(args.seed);
    let (fit, holdout) = table.split(args.test_fraction, seeds.split);
    let standardized = if fit.len() >= 2 {
        fit.standardize()?
    } else {
        fit.clone()
    };
    let stats = standardized.stats.clone().unwrap_or_else(|| fit.feature_stats());

    let n_out = if table.n_classes() <= 2 {
        table.n_classes().max(1)
    } else {
        table.n_classes()
    };
    let mut sizes = vec![table.n_features()];
    sizes.extend(&args.hidden);
    sizes.push(n_out);
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed: seeds.train,
    };
    let trained = sparx::train(&standardized, &sizes, &cfg)?;
    let offset: Vec<f64> = stats.mean.iter().zip(&stats.std).map(|(m, s)| -m / s).collect();
    let scale: Vec<f64> = stats.std.iter().map(|s| 1.0 / s).collect();
    let mlp = trained.with_input_affine(&offset, &scale);
    mlp.save(&args.out)?;

    let labels = |t: &Table| t.labels.clone().unwrap_or_default();
    let train_pred = predictions(&mlp, &fit)?;
    let train_truth = labels(&fit);
    let train_accuracy =
        train_pred.iter().zip(&train_truth).filter(|(p, t)| p == t).count() as f64 / fit.len().max(1) as f64;
    let f1 = if holdout.is_empty() {
        macro_f1(&train_truth, &train_pred)
    } else {
        macro_f1(&labels(&holdout), &predictions(&mlp, &holdout)?)
    };
    Ok(TrainSummary {
        train_accuracy,
        holdout_rows: holdout.len(),
        f1,
        seeds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub command: &'static str,
    pub model: String,
    pub data: String,
    pub ratio: f64,
    pub mode: Mode,
    pub anchor: Option<Vec<f64>>,
    pub anchor_row: Option<usize>,
    pub seeds: Seeds,
    pub sample_seed: Option<u64>,
    pub kernel_width: f64,
    pub n_samples: Option<usize>,
    pub kernel_normalization: Option<&'static str>,
    pub local_estimator: Option<LocalEstimator>,
    pub top_k: usize,
    pub prune_percentile: f64,
    pub cluster_counts: Vec<usize>,
    pub omega: u64,
    pub translated_at: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainSummary {
    pub out: PathBuf,
    pub rows: Vec<ReportRow>,
    pub files: Vec<&'static str>,
}

impl std::fmt::Display for ExplainSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", CSV_HEADER.join(","))?;
        for r in &self.rows {
            writeln!(f, "{}", row_line(r))?;
        }
        write!(f, "wrote {} files to {}", self.files.len(), self.out.display())
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn row_line(r: &ReportRow) -> String {
    [
        r.dataset.clone(),
        num(r.ratio),
        r.seed.to_string(),
        r.method.name().to_string(),
        num(r.global_io),
        num(r.local_io),
        num(r.global_structural),
        num(r.local_structural),
        r.omega.map(|o| o.to_string()).unwrap_or_default(),
        num(Some(r.kernel_width)),
        r.n_samples.to_string(),
    ]
    .join(",")
}

fn rows_csv(rows: &[ReportRow]) -> String {
    let mut s = CSV_HEADER.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&row_line(r));
        s.push('\n');
    }
    s
}

/// `Some(row)` for an index, otherwise the parsed feature vector.
fn parse_anchor(text: &str, table: &Table) -> CliResult<(Option<usize>, Vec<f64>)> {
    if let Ok(i) = text.trim().parse::<usize>() {
        let row = table
            .rows
            .get(i)
            .ok_or_else(|| usage(format!("--anchor {i} out of range for {} rows", table.len())))?;
        return Ok((Some(i), row.clone()));
    }
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(format!("--anchor '{text}': {e}")))?;
    if values.len() != table.n_features() {
        return Err(usage(format!(
            "--anchor has {} values but the model has {} features",
            values.len(),
            table.n_features()
        )));
    }
    Ok((None, values))
}

pub fn cmd_explain(args: &ExplainArgs) -> CliResult<ExplainSummary> {
    check_ratio(args.ratio)?;
    if args.top_k == 0 {
        return Err(usage("--top-k must be at least 1"));
    }
    if !(0.0..=100.0).contains(&args.prune) {
        return Err(usage("--prune must lie in [0, 100]"));
    }
    if args.mode == Mode::Local && args.anchor.is_none() {
        return Err(usage("--mode local needs --anchor"));
    }
    if args.mode == Mode::Local && args.samples < 2 {
        return Err(usage("--samples must be at least 2"));
    }
    let mlp = Mlp::load(&args.model)?;
    let table = load_features(&args.data, &args.label, &mlp)?;
    if table.is_empty() {
        return Err(sparx::Error::EmptyDataset.into());
    }
    let anchor = args.anchor.as_deref().map(|a| parse_anchor(a, &table)).transpose()?;
    let width = args
        .kernel_width
        .unwrap_or_else(|| default_kernel_width(table.n_features()));
    if !(width > 0.0 && width.is_finite()) {
        return Err(usage("--kernel-width must be positive"));
    }

    let seeds = Seeds::from_root(args.seed);
    let hidden = &mlp.layer_sizes()[1..=mlp.depth()];
    let counts = cluster_counts_from_ratio(hidden, args.ratio)?;
    let km = KMeansConfig {
        seed: seeds.cluster,
        ..KMeansConfig::default()
    };
    let partition = partition_mlp(&mlp, &table.rows, &counts, &km)?;
    let global = build_clustered(&mlp, &partition, Aggregation::Global)?;
    let global_io = global_io_unfaithfulness(&mlp, &global.inner, &table.rows)?;
    let (global_structural, _) = structural_unfaithfulness(&mlp, &global, &table.rows, None)?;
    let omega = cognitive_complexity(&partition);

    let (sample_seed, nb): (Option<u64>, Option<Neighborhood>) = match (&anchor, args.mode) {
        (Some((row, x)), Mode::Local) => {
            let seed = row.map_or(seeds.sample, |i| anchor_seed(args.seed, i));
            let nb = sample_neighborhood(&table, x, args.samples, Some(width), seed)?;
            (Some(seed), Some(nb))
        }
        _ => (None, None),
    };
    let clustered = match &nb {
        Some(nb) => build_clustered(&mlp, &partition, Aggregation::Local(nb, args.local_estimator.into()))?,
        None => global,
    };
    let point = match (&anchor, args.mode) {
        (Some((_, x)), _) => x.clone(),
        (None, _) => table.column_means(),
    };

    let dataset = dataset_name(&args.data);
    let mut rows = vec![ReportRow {
        dataset: dataset.clone(),
        ratio: Some(args.ratio),
        seed: args.seed,
        method: Method::Sparx,
        global_io: Some(global_io),
        local_io: None,
        global_structural: Some(global_structural),
        local_structural: None,
        omega: Some(omega),
        kernel_width: width,
        n_samples: if nb.is_some() { args.samples } else { 0 },
    }];
    if let Some(nb) = &nb {
        let target = argmax_class(&mlp.outputs(&point)?).min(mlp.n_outputs() - 1);
        let sub = Substitute::Network(&clustered.inner);
        rows[0].local_io = Some(local_io_for_class(&mlp, sub, nb, target)?);
        rows[0].local_structural = structural_unfaithfulness(&mlp, &clustered, &[], Some(nb))?.1;
        if !args.no_baseline {
            let ridge = fit_ridge_surrogate(&mlp, nb, target, args.lambda)?;
            rows.push(ReportRow {
                dataset,
                ratio: None,
                seed: args.seed,
                method: Method::Ridge,
                global_io: None,
                local_io: Some(local_io_unfaithfulness(&mlp, Substitute::Ridge(&ridge), nb)?),
                global_structural: None,
                local_structural: None,
                omega: None,
                kernel_width: width,
                n_samples: args.samples,
            });
        }
    }

    let qaf = translate_auto(&clustered, &point)?;
    let strengths = final_strengths(&qaf)?;
    let relevance = match args.mode {
        Mode::Global => relevance_global(&qaf, args.top_k)?,
        Mode::Local => relevance_local(&qaf, &strengths, args.top_k)?,
    };
    let local_strengths = (args.mode == Mode::Local).then_some(&strengths);
    let attribution = feature_attribution(&qaf, local_strengths, args.top_k)?;
    let shown = prune_for_display(&qaf, args.prune)?;
    let dot = export_dot(&shown, Some(&strengths), Some(&relevance));

    let meta = RunMetadata {
        command: "explain",
        model: args.model.display().to_string(),
        data: args.data.display().to_string(),
        ratio: args.ratio,
        mode: args.mode,
        anchor: anchor.as_ref().map(|(_, x)| x.clone()),
        anchor_row: anchor.as_ref().and_then(|(r, _)| *r),
        seeds,
        sample_seed,
        kernel_width: width,
        n_samples: nb.as_ref().map(Neighborhood::len),
        kernel_normalization: nb.as_ref().map(|_| KERNEL_NORMALIZATION),
        local_estimator: nb.as_ref().map(|_| args.local_estimator.into()),
        top_k: args.top_k,
        prune_percentile: args.prune,
        cluster_counts: partition.counts(),
        omega,
        translated_at: point,
    };

    create_dir(&args.out)?;
    let files: Vec<(&'static str, String)> = vec![
        ("clustered_model.json", clustered.inner.to_json()?),
        ("clustered_model.sidecar.json", clustered.sidecar_json()?),
        ("qaf.json", qaf.to_json()?),
        (
            "strengths.json",
            serde_json::to_string_pretty(&strengths).map_err(sparx::Error::from)?,
        ),
        ("qaf.dot", dot),
        ("wordcloud.json", relevance.word_cloud_json()?),
        ("feature_attribution.json", attribution.word_cloud_json()?),
        ("report.csv", rows_csv(&rows)),
        (
            "run.json",
            serde_json::to_string_pretty(&meta).map_err(sparx::Error::from)?,
        ),
    ];
    for (name, text) in &files {
        write(&args.out.join(name), text)?;
    }
    Ok(ExplainSummary {
        out: args.out.clone(),
        rows,
        files: files.iter().map(|(n, _)| *n).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateSummary {
    pub report: sparx::EvalReport,
    pub out: PathBuf,
}

impl std::fmt::Display for EvaluateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.report.summary())?;
        write!(f, "wrote report.csv and report.json to {}", self.out.display())
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<EvaluateSummary> {
    let ratios = if args.ratio.is_empty() {
        DEFAULT_RATIOS.to_vec()
    } else {
        args.ratio.clone()
    };
    for &r in &ratios {
        check_ratio(r)?;
    }
    if args.seed.is_empty() {
        return Err(usage("--seed needs at least one value"));
    }
    let mlp = Mlp::load(&args.model)?;
    let table = load_features(&args.data, &args.label, &mlp)?;
    let anchors = if args.anchor.is_empty() {
        (0..table.len()).collect()
    } else {
        args.anchor.clone()
    };
    if let Some(bad) = anchors.iter().find(|&&a| a >= table.len()) {
        return Err(usage(format!("--anchor {bad} out of range for {} rows", table.len())));
    }
    let cfg = EvalConfig {
        dataset: dataset_name(&args.data),
        ratios,
        anchors,
        seeds: args.seed.clone(),
        lambda: args.lambda,
        n_samples: args.samples,
        kernel_width: args.kernel_width,
        baseline: !args.no_baseline,
        local_estimator: args.local_estimator.into(),
        ..EvalConfig::default()
    };
    let report = evaluate(&mlp, &table, &cfg)?;
    create_dir(&args.out)?;
    write(&args.out.join("report.csv"), report.to_csv()?)?;
    write(&args.out.join("report.json"), report.to_json()?)?;
    Ok(EvaluateSummary {
        report,
        out: args.out.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub rows: usize,
    pub max_deviation: f64,
    pub clustered_max_deviation: Option<f64>,
    pub tol: f64,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tol && self.clustered_max_deviation.is_none_or(|d| d <= self.tol)
    }
}

impl std::fmt::Display for CheckSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} rows, max deviation {:e}", self.rows, self.max_deviation)?;
        if let Some(d) = self.clustered_max_deviation {
            write!(f, ", clustered model {d:e}")?;
        }
        write!(
            f,
            " (tolerance {:e}): {}",
            self.tol,
            if self.passed() { "ok" } else { "FAILED" }
        )
    }
}

pub fn cmd_check_equivalence(args: &CheckArgs) -> CliResult<CheckSummary> {
    if let Some(r) = args.ratio {
        check_ratio(r)?;
    }
    if args.tol.is_nan() || args.tol < 0.0 {
        return Err(usage("--tol must be non-negative"));
    }
    let mlp = Mlp::load(&args.model)?;
    let table = load_features(&args.data, &args.label, &mlp)?;
    let mut max_deviation: f64 = 0.0;
    for x in &table.rows {
        max_deviation = max_deviation.max(check_equivalence(&mlp, x, args.tol)?.max_deviation);
    }
    let clustered_max_deviation = match args.ratio {
        Some(r) => {
            let counts = cluster_counts_from_ratio(&mlp.layer_sizes()[1..=mlp.depth()], r)?;
            let km = KMeansConfig {
                seed: Seeds::from_root(args.seed).cluster,
                ..KMeansConfig::default()
            };
            let partition = partition_mlp(&mlp, &table.rows, &counts, &km)?;
            let clustered = build_clustered(&mlp, &partition, Aggregation::Global)?;
            let mut worst: f64 = 0.0;
            for x in &table.rows {
                worst = worst.max(check_equivalence(&clustered, x, args.tol)?.max_deviation);
            }
            Some(worst)
        }
        None => None,
    };
    Ok(CheckSummary {
        rows: table.len(),
        max_deviation,
        clustered_max_deviation,
        tol: args.tol,
    })
}
