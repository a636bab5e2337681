//! Tabular data, standardization and kernel-weighted neighbourhoods.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature population mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Population statistics of `rows`. Zero-variance features get std 1.
    pub fn of(rows: &[Vec<f64>], n_features: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; n_features];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; n_features];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        FeatureStats { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    /// Label values in class-index order.
    pub class_names: Vec<String>,
    /// Statistics recorded by [`Table::standardize`].
    pub stats: Option<FeatureStats>,
}

impl Table {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<usize>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if let Some(bad) = rows.iter().position(|r| r.len() != feature_names.len()) {
            return Err(Error::LengthMismatch {
                expected: feature_names.len(),
                got: rows[bad].len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::LengthMismatch {
                    expected: rows.len(),
                    got: l.len(),
                });
            }
        }
        Ok(Table {
            feature_names,
            rows,
            labels,
            class_names,
            stats: None,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, label_column)
    }

    /// Parse comma-separated data with a header row. Labels may be arbitrary
    /// strings; classes are indexed in numeric order when every label parses
    /// as a number and in lexical order otherwise.
    pub fn read_csv<R: Read>(reader: R, label_column: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(0, "header", e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let label_idx = match label_column {
            Some(name) => Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Config(format!("label column `{name}` not found in header {headers:?}")))?,
            ),
            None => None,
        };
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, h)| h.clone())
            .collect();

        let mut rows = Vec::new();
        let mut raw_labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row_no = r + 2;
            let record = record.map_err(|e| csv_error(row_no, "record", e))?;
            if record.len() != headers.len() {
                return Err(Error::Csv {
                    row: row_no,
                    column: "*".into(),
                    message: format!("expected {} cells, found {}", headers.len(), record.len()),
                });
            }
            let mut row = Vec::with_capacity(feature_names.len());
            for (c, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                if Some(c) == label_idx {
                    raw_labels.push(cell.to_string());
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| Error::Csv {
                    row: row_no,
                    column: headers[c].clone(),
                    message: format!("`{cell}` is not a number"),
                })?;
                row.push(v);
            }
            rows.push(row);
        }

        let (labels, class_names) = if label_idx.is_some() {
            let (l, c) = index_labels(&raw_labels);
            (Some(l), c)
        } else {
            (None, Vec::new())
        };
        Table::new(feature_names, rows, labels, class_names)
    }

    /// Keep only the named feature columns, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<Table> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Config(format!("column `{n}` missing from data")))
            })
            .collect::<Result<_>>()?;
        Ok(Table {
            feature_names: names.to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            stats: None,
        })
    }

    pub fn feature_stats(&self) -> FeatureStats {
        FeatureStats::of(&self.rows, self.n_features())
    }

    /// Zero-mean, unit population-variance features. Constant features map to 0.
    pub fn standardize(&self) -> Result<Table> {
        if self.rows.len() < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                got: self.rows.len(),
            });
        }
        let stats = self.feature_stats();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(stats.mean.iter().zip(&stats.std))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect();
        Ok(Table {
            rows,
            stats: Some(stats),
            ..self.clone()
        })
    }

    /// Seeded shuffle split into `(train, test)` with `floor(n * test_fraction)`
    /// test rows.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (Table, Table) {
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (self.rows.len() as f64 * test_fraction.clamp(0.0, 1.0)).floor() as usize;
        let (test_idx, train_idx) = order.split_at(n_test);
        (self.subset(train_idx), self.subset(test_idx))
    }

    pub fn subset(&self, idx: &[usize]) -> Table {
        Table {
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            class_names: self.class_names.clone(),
            stats: self.stats.clone(),
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        FeatureStats::of(&self.rows, self.n_features()).mean
    }
}

fn csv_error(row: usize, column: &str, e: csv::Error) -> Error {
    Error::Csv {
        row,
        column: column.into(),
        message: e.to_string(),
    }
}

fn index_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut classes: Vec<String> = raw.to_vec();
    classes.sort();
    classes.dedup();
    let numeric: Option<Vec<f64>> = classes.iter().map(|c| c.parse().ok()).collect();
    if let Some(values) = numeric {
        let mut pairs: Vec<(f64, String)> = values.into_iter().zip(classes).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        classes = pairs.into_iter().map(|(_, c)| c).collect();
    }
    let labels = raw
        .iter()
        .map(|r| classes.iter().position(|c| c == r).unwrap())
        .collect();
    (labels, classes)
}

/// Default kernel width `0.75 * sqrt(#features)`.
pub fn default_kernel_width(n_features: usize) -> f64 {
    0.75 * (n_features as f64).sqrt()
}

/// Exponential kernel `exp(-‖a − b‖² / σ²)`.
pub fn kernel_weight(a: &[f64], b: &[f64], width: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    (-d2 / (width * width)).exp()
}

/// Perturbed samples around an anchor with their kernel weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub anchor: Vec<f64>,
    /// `samples[0]` is the anchor itself.
    pub samples: Vec<Vec<f64>>,
    pub kernel_weights: Vec<f64>,
    pub kernel_width: f64,
}

impl Neighborhood {
    /// Build from explicit samples, weighting each by the exponential kernel.
    pub fn from_samples(anchor: Vec<f64>, samples: Vec<Vec<f64>>, kernel_width: f64) -> Self {
        let kernel_weights = samples
            .iter()
            .map(|s| kernel_weight(s, &anchor, kernel_width))
            .collect();
        Neighborhood {
            anchor,
            samples,
            kernel_weights,
            kernel_width,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Gaussian perturbations of `x` scaled by each feature's standard deviation
/// in `table` (the recorded statistics when the table was standardized).
pub fn sample_neighborhood(
    table: &Table,
    x: &[f64],
    n: usize,
    kernel_width: Option<f64>,
    seed: u64,
) -> Result<Neighborhood> {
    if n == 0 {
        return Err(Error::Config("neighbourhood needs at least one sample".into()));
    }
    if x.len() != table.n_features() {
        return Err(Error::InputShape {
            expected: table.n_features(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("anchor has non-finite features".into()));
    }
    let width = kernel_width.unwrap_or_else(|| default_kernel_width(x.len()));
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Config(format!("kernel width must be positive, got {width}")));
    }
    let std = if table.rows.is_empty() {
        vec![1.0; x.len()]
    } else {
        table.feature_stats().std
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    samples.push(x.to_vec());
    for _ in 1..n {
        samples.push(
            x.iter()
                .zip(&std)
                .map(|(v, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + s * z
                })
                .collect(),
        );
    }
    Ok(Neighborhood::from_samples(x.to_vec(), samples, width))
}
