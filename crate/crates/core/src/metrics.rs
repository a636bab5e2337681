//! Unfaithfulness scores, cognitive complexity and the ridge baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cluster::Partition;
use crate::dataset::Neighborhood;
use crate::error::{Error, Result};
use crate::model::Mlp;
use crate::sparsify::ClusteredMlp;

fn squared_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_outputs(mlp: &Mlp, other: &Mlp) -> Result<()> {
    if mlp.n_inputs() != other.n_inputs() || mlp.n_outputs() != other.n_outputs() {
        return Err(Error::InconsistentPartition(format!(
            "model maps {} -> {} but substitute maps {} -> {}",
            mlp.n_inputs(),
            mlp.n_outputs(),
            other.n_inputs(),
            other.n_outputs()
        )));
    }
    Ok(())
}

/// Summed squared gap between post-head outputs over `rows`.
pub fn global_io_unfaithfulness(mlp: &Mlp, substitute: &Mlp, rows: &[Vec<f64>]) -> Result<f64> {
    check_outputs(mlp, substitute)?;
    rows.iter()
        .map(|x| Ok(squared_gap(&mlp.outputs(x)?, &substitute.outputs(x)?)))
        .sum()
}

/// Stand-in for the original model in the local input-output score.
#[derive(Debug, Clone, Copy)]
pub enum Substitute<'a> {
    Network(&'a Mlp),
    /// Single-output surrogate; only its target class is compared.
    Ridge(&'a RidgeSurrogate),
}

/// Kernel-weighted squared output gap over a neighbourhood. Networks are
/// compared on every output, ridge surrogates on their target class.
pub fn local_io_unfaithfulness(mlp: &Mlp, substitute: Substitute<'_>, nb: &Neighborhood) -> Result<f64> {
    match substitute {
        Substitute::Network(net) => {
            check_outputs(mlp, net)?;
            nb.samples
                .iter()
                .zip(&nb.kernel_weights)
                .map(|(x, &pi)| Ok(pi * squared_gap(&mlp.outputs(x)?, &net.outputs(x)?)))
                .sum()
        }
        Substitute::Ridge(r) => local_io_for_class(mlp, substitute, nb, r.target_class),
    }
}

/// Kernel-weighted squared gap restricted to one output.
pub fn local_io_for_class(mlp: &Mlp, substitute: Substitute<'_>, nb: &Neighborhood, class: usize) -> Result<f64> {
    if class >= mlp.n_outputs() {
        return Err(Error::Config(format!("class {class} out of range")));
    }
    let mut total = 0.0;
    for (x, &pi) in nb.samples.iter().zip(&nb.kernel_weights) {
        let target = mlp.outputs(x)?[class];
        let predicted = match substitute {
            Substitute::Network(net) => net.outputs(x)?[class],
            Substitute::Ridge(r) => {
                if r.target_class != class {
                    return Err(Error::Config(format!(
                        "surrogate explains class {}, not {class}",
                        r.target_class
                    )));
                }
                r.predict(x)
            }
        };
        total += pi * (target - predicted) * (target - predicted);
    }
    Ok(total)
}

/// Summed squared gap between each neuron and the cluster-neuron that
/// summarises it, over layers `1..=d+1`, weighted by `weights` per sample.
fn structural(mlp: &Mlp, clustered: &ClusteredMlp, samples: &[Vec<f64>], weights: Option<&[f64]>) -> Result<f64> {
    let sizes = mlp.layer_sizes();
    let last = sizes.len() - 1;
    // membership[l][i] = cluster index of neuron i in layer l
    let membership: Vec<Vec<usize>> = (1..=last)
        .map(|l| {
            let mut m = vec![0; sizes[l]];
            for (j, c) in clustered.clusters_at(l).iter().enumerate() {
                for &i in c {
                    m[i] = j;
                }
            }
            m
        })
        .collect();
    let mut total = 0.0;
    for (k, x) in samples.iter().enumerate() {
        let orig = mlp.forward(x)?;
        let clus = clustered.inner.forward(x)?;
        let mut s = 0.0;
        for l in 1..=last {
            for (i, &j) in membership[l - 1].iter().enumerate() {
                let d = orig.layers[l][i] - clus.layers[l][j];
                s += d * d;
            }
        }
        total += weights.map_or(1.0, |w| w[k]) * s;
    }
    Ok(total)
}

/// Global structural unfaithfulness over `rows` and, when a neighbourhood is
/// given, the kernel-weighted local version over its samples.
pub fn structural_unfaithfulness(
    mlp: &Mlp,
    clustered: &ClusteredMlp,
    rows: &[Vec<f64>],
    nb: Option<&Neighborhood>,
) -> Result<(f64, Option<f64>)> {
    let sizes = mlp.layer_sizes();
    clustered.partition.validate(&sizes[1..sizes.len() - 1])?;
    check_outputs(mlp, &clustered.inner)?;
    let global = structural(mlp, clustered, rows, None)?;
    let local = nb
        .map(|nb| structural(mlp, clustered, &nb.samples, Some(&nb.kernel_weights)))
        .transpose()?;
    Ok((global, local))
}

/// Product of the hidden-layer cluster counts.
pub fn cognitive_complexity(partition: &Partition) -> u64 {
    partition.layers.iter().map(|c| c.len() as u64).product()
}

/// Weighted linear surrogate of one output around an anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSurrogate {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub regularization: f64,
    pub target_class: usize,
}

impl RidgeSurrogate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Closed-form weighted ridge regression with an unpenalised intercept,
/// minimising `Σ w (y − β₀ − βᵀx)² + λ‖β‖²`.
pub fn fit_weighted_ridge(
    samples: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    if targets.len() != n || weights.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: targets.len().min(weights.len()),
        });
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Config(format!(
            "regularization must be non-negative, got {lambda}"
        )));
    }
    let p = samples[0].len();
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Numeric("kernel weights sum to zero".into()));
    }
    // Centre on weighted means so the intercept drops out of the system.
    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    for ((x, &y), &w) in samples.iter().zip(targets).zip(weights) {
        for (m, v) in x_mean.iter_mut().zip(x) {
            *m += w * v / total;
        }
        y_mean += w * y / total;
    }
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for ((x, &y), &w) in samples.iter().zip(targets).zip(weights) {
        let xc: Vec<f64> = x.iter().zip(&x_mean).map(|(v, m)| v - m).collect();
        let yc = y - y_mean;
        for a in 0..p {
            rhs[a] += w * xc[a] * yc;
            for b in 0..p {
                gram[(a, b)] += w * xc[a] * xc[b];
            }
        }
    }
    for a in 0..p {
        gram[(a, a)] += lambda;
    }
    let beta = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("ridge system is singular; increase the regularization".into()))?
        .solve(&rhs);
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok((coefficients, intercept))
}

/// Ridge surrogate of `mlp`'s `target_class` output over a neighbourhood.
pub fn fit_ridge_surrogate(mlp: &Mlp, nb: &Neighborhood, target_class: usize, lambda: f64) -> Result<RidgeSurrogate> {
    if target_class >= mlp.n_outputs() {
        return Err(Error::Config(format!("class {target_class} out of range")));
    }
    let targets = nb
        .samples
        .iter()
        .map(|x| mlp.outputs(x).map(|o| o[target_class]))
        .collect::<Result<Vec<_>>>()?;
    let (coefficients, intercept) = fit_weighted_ridge(&nb.samples, &targets, &nb.kernel_weights, lambda)?;
    Ok(RidgeSurrogate {
        coefficients,
        intercept,
        regularization: lambda,
        target_class,
    })
}

/// Run parameters recorded with every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub ratio: f64,
    pub kernel_width: Option<f64>,
    pub n_samples: Option<usize>,
    pub cluster_seed: u64,
    pub sample_seed: Option<u64>,
    pub kernel_normalization: Option<String>,
    #[serde(default)]
    pub local_estimator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub global_io: f64,
    pub local_io: Option<f64>,
    pub global_structural: f64,
    pub local_structural: Option<f64>,
    pub cognitive_complexity: u64,
    pub metadata: ReportMetadata,
}
