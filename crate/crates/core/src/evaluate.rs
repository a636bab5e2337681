//! Experiment harness: faithfulness across ratios, seeds and anchors, with a
//! ridge-surrogate baseline, written as a CSV table and a JSON report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_counts_from_ratio, partition_mlp, KMeansConfig, Partition};
use crate::dataset::{default_kernel_width, sample_neighborhood, Table};
use crate::error::{Error, Result};
use crate::metrics::{
    cognitive_complexity, fit_ridge_surrogate, global_io_unfaithfulness, local_io_for_class, local_io_unfaithfulness,
    structural_unfaithfulness, FaithfulnessReport, ReportMetadata, Substitute,
};
use crate::model::Mlp;
use crate::seed::{derive_indexed, Seeds};
use crate::sparsify::{build_clustered, Aggregation, LocalEstimator, KERNEL_NORMALIZATION};

pub const DEFAULT_RATIOS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_LAMBDA: f64 = 1.0;

pub const CSV_HEADER: [&str; 11] = [
    "dataset",
    "ratio",
    "seed",
    "method",
    "global_io",
    "local_io",
    "global_structural",
    "local_structural",
    "omega",
    "kernel_width",
    "n_samples",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Name written into the `dataset` column.
    pub dataset: String,
    pub ratios: Vec<f64>,
    /// Row indices of `table` used as anchors for the local metrics.
    pub anchors: Vec<usize>,
    /// Root seeds; each is split into cluster and sample streams.
    pub seeds: Vec<u64>,
    pub lambda: f64,
    pub n_samples: usize,
    /// Defaults to `0.75 · sqrt(#features)`.
    pub kernel_width: Option<f64>,
    pub baseline: bool,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    #[serde(default)]
    pub local_estimator: LocalEstimator,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let km = KMeansConfig::default();
        EvalConfig {
            dataset: "data".into(),
            ratios: DEFAULT_RATIOS.to_vec(),
            anchors: Vec::new(),
            seeds: vec![0],
            lambda: DEFAULT_LAMBDA,
            n_samples: DEFAULT_SAMPLES,
            kernel_width: None,
            baseline: true,
            kmeans_restarts: km.restarts,
            kmeans_max_iters: km.max_iters,
            local_estimator: LocalEstimator::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sparx,
    Ridge,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sparx => "sparx",
            Method::Ridge => "ridge",
        }
    }
}

/// One line of the report table. Cells that do not apply to the method are
/// `None` and written empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub ratio: Option<f64>,
    pub seed: u64,
    pub method: Method,
    pub global_io: Option<f64>,
    /// Mean over anchors, restricted to each anchor's predicted class.
    pub local_io: Option<f64>,
    pub global_structural: Option<f64>,
    pub local_structural: Option<f64>,
    pub omega: Option<u64>,
    pub kernel_width: f64,
    pub n_samples: usize,
}

/// Per-anchor numbers behind the averaged rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorCell {
    pub ratio: f64,
    pub seed: u64,
    pub anchor: usize,
    pub sample_seed: u64,
    pub target_class: usize,
    /// Over every output.
    pub local_io: f64,
    pub local_io_target: f64,
    pub local_structural: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCell {
    pub seed: u64,
    pub anchor: usize,
    pub sample_seed: u64,
    pub target_class: usize,
    pub local_io: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub kernel_width: f64,
    pub kernel_normalization: String,
    pub local_estimator: LocalEstimator,
    /// One per (ratio, seed), metrics averaged over anchors.
    pub reports: Vec<FaithfulnessReport>,
    pub partitions: Vec<Partition>,
    pub rows: Vec<ReportRow>,
    pub anchors: Vec<AnchorCell>,
    pub baseline: Vec<BaselineCell>,
}

fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Sample seed for one anchor: independent of the ratio so every ratio sees
/// the same neighbourhood.
pub fn anchor_seed(root: u64, anchor: usize) -> u64 {
    derive_indexed(Seeds::from_root(root).sample, "anchor", anchor as u64)
}

fn validate(mlp: &Mlp, table: &Table, cfg: &EvalConfig) -> Result<f64> {
    mlp.validate()?;
    if table.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if table.n_features() != mlp.n_inputs() {
        return Err(Error::InputShape {
            expected: mlp.n_inputs(),
            got: table.n_features(),
        });
    }
    if cfg.ratios.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Config("at least one ratio and one seed are required".into()));
    }
    let hidden = &mlp.layer_sizes()[1..=mlp.depth()];
    for &r in &cfg.ratios {
        cluster_counts_from_ratio(hidden, r)?;
    }
    if let Some(&bad) = cfg.anchors.iter().find(|&&a| a >= table.len()) {
        return Err(Error::Config(format!(
            "anchor index {bad} out of range for {} rows",
            table.len()
        )));
    }
    if !cfg.anchors.is_empty() && cfg.n_samples < 2 {
        return Err(Error::Config("local metrics need at least 2 samples".into()));
    }
    let width = cfg
        .kernel_width
        .unwrap_or_else(|| default_kernel_width(table.n_features()));
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Config(format!("kernel width must be positive, got {width}")));
    }
    Ok(width)
}

/// Run the full grid. Results depend only on the inputs and `cfg`, not on
/// the thread count.
pub fn evaluate(mlp: &Mlp, table: &Table, cfg: &EvalConfig) -> Result<EvalReport> {
    let width = validate(mlp, table, cfg)?;
    let hidden: Vec<usize> = mlp.layer_sizes()[1..=mlp.depth()].to_vec();

    let grid: Vec<(f64, u64)> = cfg
        .ratios
        .iter()
        .flat_map(|&r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();

    // Phase 1: a partition and global metrics per (ratio, seed).
    let globals = par_map(&grid, |&(ratio, seed)| -> Result<_> {
        let counts = cluster_counts_from_ratio(&hidden, ratio)?;
        let km = KMeansConfig {
            max_iters: cfg.kmeans_max_iters,
            restarts: cfg.kmeans_restarts,
            seed: Seeds::from_root(seed).cluster,
        };
        let partition = partition_mlp(mlp, &table.rows, &counts, &km)?;
        let clustered = build_clustered(mlp, &partition, Aggregation::Global)?;
        let gio = global_io_unfaithfulness(mlp, &clustered.inner, &table.rows)?;
        let (gs, _) = structural_unfaithfulness(mlp, &clustered, &table.rows, None)?;
        Ok((partition, gio, gs))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    // Phase 2: local metrics per (ratio, seed, anchor).
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| cfg.anchors.iter().map(move |&a| (g, a)))
        .collect();
    let anchor_cells = par_map(&cells, |&(g, a)| -> Result<AnchorCell> {
        let (ratio, seed) = grid[g];
        let sample_seed = anchor_seed(seed, a);
        let x = &table.rows[a];
        let nb = sample_neighborhood(table, x, cfg.n_samples, Some(width), sample_seed)?;
        let local = build_clustered(mlp, &globals[g].0, Aggregation::Local(&nb, cfg.local_estimator))?;
        let target_class = mlp.predict_class(x)?;
        let target_class = target_class.min(mlp.n_outputs() - 1);
        let sub = Substitute::Network(&local.inner);
        let (_, ls) = structural_unfaithfulness(mlp, &local, &[], Some(&nb))?;
        Ok(AnchorCell {
            ratio,
            seed,
            anchor: a,
            sample_seed,
            target_class,
            local_io: local_io_unfaithfulness(mlp, sub, &nb)?,
            local_io_target: local_io_for_class(mlp, sub, &nb, target_class)?,
            local_structural: ls.unwrap_or(0.0),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let baseline_cells = if cfg.baseline {
        let cells: Vec<(u64, usize)> = cfg
            .seeds
            .iter()
            .flat_map(|&s| cfg.anchors.iter().map(move |&a| (s, a)))
            .collect();
        par_map(&cells, |&(seed, a)| -> Result<BaselineCell> {
            let sample_seed = anchor_seed(seed, a);
            let x = &table.rows[a];
            let nb = sample_neighborhood(table, x, cfg.n_samples, Some(width), sample_seed)?;
            let target_class = mlp.predict_class(x)?.min(mlp.n_outputs() - 1);
            let ridge = fit_ridge_surrogate(mlp, &nb, target_class, cfg.lambda)?;
            Ok(BaselineCell {
                seed,
                anchor: a,
                sample_seed,
                target_class,
                local_io: local_io_unfaithfulness(mlp, Substitute::Ridge(&ridge), &nb)?,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut reports = Vec::with_capacity(grid.len());
    let mut rows = Vec::new();
    let n_samples = cfg.n_samples;
    for (g, &(ratio, seed)) in grid.iter().enumerate() {
        let (partition, gio, gs) = &globals[g];
        let mine: Vec<&AnchorCell> = anchor_cells
            .iter()
            .filter(|c| c.ratio == ratio && c.seed == seed)
            .collect();
        let omega = cognitive_complexity(partition);
        let local_full = mean(mine.iter().map(|c| c.local_io));
        let local_target = mean(mine.iter().map(|c| c.local_io_target));
        let local_structural = mean(mine.iter().map(|c| c.local_structural));
        let has_local = !mine.is_empty();
        reports.push(FaithfulnessReport {
            global_io: *gio,
            local_io: local_full,
            global_structural: *gs,
            local_structural,
            cognitive_complexity: omega,
            metadata: ReportMetadata {
                ratio,
                kernel_width: has_local.then_some(width),
                n_samples: has_local.then_some(n_samples),
                cluster_seed: Seeds::from_root(seed).cluster,
                sample_seed: has_local.then(|| Seeds::from_root(seed).sample),
                kernel_normalization: has_local.then(|| KERNEL_NORMALIZATION.to_string()),
                local_estimator: has_local.then(|| cfg.local_estimator.name().to_string()),
            },
        });
        rows.push(ReportRow {
            dataset: cfg.dataset.clone(),
            ratio: Some(ratio),
            seed,
            method: Method::Sparx,
            global_io: Some(*gio),
            local_io: local_target,
            global_structural: Some(*gs),
            local_structural,
            omega: Some(omega),
            kernel_width: width,
            n_samples,
        });
    }
    if cfg.baseline {
        for &seed in &cfg.seeds {
            let local = mean(baseline_cells.iter().filter(|c| c.seed == seed).map(|c| c.local_io));
            rows.push(ReportRow {
                dataset: cfg.dataset.clone(),
                ratio: None,
                seed,
                method: Method::Ridge,
                global_io: None,
                local_io: local,
                global_structural: None,
                local_structural: None,
                omega: None,
                kernel_width: width,
                n_samples,
            });
        }
    }

    Ok(EvalReport {
        config: cfg.clone(),
        kernel_width: width,
        kernel_normalization: KERNEL_NORMALIZATION.to_string(),
        local_estimator: cfg.local_estimator,
        reports,
        partitions: globals.into_iter().map(|(p, _, _)| p).collect(),
        rows,
        anchors: anchor_cells,
        baseline: baseline_cells,
    })
}

/// Shortest decimal that parses back to the same `f64`.
fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

impl EvalReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                cell(r.ratio),
                r.seed.to_string(),
                r.method.name().to_string(),
                cell(r.global_io),
                cell(r.local_io),
                cell(r.global_structural),
                cell(r.local_structural),
                r.omega.map(|o| o.to_string()).unwrap_or_default(),
                cell(Some(r.kernel_width)),
                r.n_samples.to_string(),
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Human-readable summary, one line per row.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<6} ratio={:<4} seed={:<4} global_io={:<12} local_io={:<12} global_structural={:<12} omega={}",
                r.method.name(),
                r.ratio.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                r.seed,
                r.global_io.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
                r.local_io.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
                r.global_structural
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "-".into()),
                r.omega.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            );
        }
        out
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Csv {
        row: 0,
        column: String::new(),
        message: e.to_string(),
    }
}
