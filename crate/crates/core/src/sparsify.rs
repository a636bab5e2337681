//! Building the clustered network from a partition.
//!
//! Biases of a cluster-neuron are the mean of its members' biases. Edge
//! weights are either the dataset-independent average (global) or an
//! activation-weighted average over a kernel-weighted neighbourhood (local),
//! which must be built layer by layer because it reads the clustered
//! network's own activations.
//!
//! Local edges relate the flow `Σ_{i∈C1} (1/|C2|) Σ_{j∈C2} W_{j,i} a_i` that
//! the members of `C1` send into `C2` to the activation `a_C1` of the
//! cluster-neuron on each neighbourhood sample. Two estimators of the edge
//! weight are offered (see [`LocalEstimator`]): the kernel-weighted mean of
//! the per-sample ratios `flow / a_C1`, and the kernel-weighted least-squares
//! fit of `w · a_C1 ≈ flow`. Both return the original weight for singleton
//! clusters. The ratio mean is unstable whenever `a_C1` comes close to zero
//! on some samples, which is why least squares is the default.

use serde::{Deserialize, Serialize};

use crate::cluster::Partition;
use crate::dataset::Neighborhood;
use crate::error::{Error, Result};
use crate::model::{ActivationTrace, Layer, Mlp};

/// Cluster-neuron activations below this magnitude drop the sample from a
/// local edge aggregate.
pub const DEAD_ACTIVATION: f64 = 1e-8;

/// Name recorded in reports for how local kernel weights are normalised.
pub const KERNEL_NORMALIZATION: &str = "live-sum";

/// How a local edge weight is estimated from the neighbourhood samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalEstimator {
    /// `w = Σ_k π_k a_C1(k) flow(k) / Σ_k π_k a_C1(k)²`.
    #[default]
    LeastSquares,
    /// `w = Σ_k (π_k / Σπ) flow(k) / a_C1(k)`.
    PerSample,
}

impl LocalEstimator {
    pub fn name(self) -> &'static str {
        match self {
            LocalEstimator::LeastSquares => "least-squares",
            LocalEstimator::PerSample => "per-sample",
        }
    }
}

impl std::fmt::Display for LocalEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Aggregation<'a> {
    Global,
    Local(&'a Neighborhood, LocalEstimator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ClusterMode {
    Global,
    Local {
        anchor: Vec<f64>,
        kernel_width: f64,
        samples: usize,
        kernel_normalization: String,
        estimator: LocalEstimator,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredMlp {
    /// Network over cluster-neurons, sizes `[|V_0|, K_1, ..., K_d, |V_{d+1}|]`.
    pub inner: Mlp,
    pub partition: Partition,
    pub mode: ClusterMode,
    /// Display names of hidden cluster-neurons, per hidden layer.
    pub cluster_labels: Vec<Vec<String>>,
}

impl ClusteredMlp {
    /// Clusters of layer `l` of the clustered network, including the
    /// singleton input and output layers.
    pub fn clusters_at(&self, l: usize) -> Vec<Vec<usize>> {
        clusters_at(&self.inner_sizes_original(), &self.partition, l)
    }

    fn inner_sizes_original(&self) -> Vec<usize> {
        let mut sizes = vec![self.inner.n_inputs()];
        sizes.extend(
            self.partition
                .layers
                .iter()
                .map(|c| c.iter().map(Vec::len).sum::<usize>()),
        );
        sizes.push(self.inner.n_outputs());
        sizes
    }

    /// Sidecar metadata written next to the clustered weights.
    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            partition: &'a Partition,
            mode: &'static str,
            anchor: Option<&'a [f64]>,
            kernel_width: Option<f64>,
            samples: Option<usize>,
            kernel_normalization: Option<&'a str>,
            local_estimator: Option<LocalEstimator>,
            cluster_labels: &'a [Vec<String>],
        }
        let sidecar = match &self.mode {
            ClusterMode::Global => Sidecar {
                partition: &self.partition,
                mode: "global",
                anchor: None,
                kernel_width: None,
                samples: None,
                kernel_normalization: None,
                local_estimator: None,
                cluster_labels: &self.cluster_labels,
            },
            ClusterMode::Local {
                anchor,
                kernel_width,
                samples,
                kernel_normalization,
                estimator,
            } => Sidecar {
                partition: &self.partition,
                mode: "local",
                anchor: Some(anchor),
                kernel_width: Some(*kernel_width),
                samples: Some(*samples),
                kernel_normalization: Some(kernel_normalization),
                local_estimator: Some(*estimator),
                cluster_labels: &self.cluster_labels,
            },
        };
        Ok(serde_json::to_string_pretty(&sidecar)?)
    }
}

fn clusters_at(original_sizes: &[usize], partition: &Partition, l: usize) -> Vec<Vec<usize>> {
    let last = original_sizes.len() - 1;
    if l == 0 || l == last {
        (0..original_sizes[l]).map(|i| vec![i]).collect()
    } else {
        partition.layer(l).to_vec()
    }
}

fn hidden_sizes(mlp: &Mlp) -> Vec<usize> {
    let sizes = mlp.layer_sizes();
    sizes[1..sizes.len() - 1].to_vec()
}

fn check_cluster(cluster: &[usize], width: usize) -> Result<()> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if let Some(&bad) = cluster.iter().find(|&&i| i >= width) {
        return Err(Error::InconsistentPartition(format!(
            "neuron {bad} out of range for layer of width {width}"
        )));
    }
    Ok(())
}

/// Mean bias of the members of `cluster` in layer `layer` (`1..=d+1`).
pub fn aggregate_bias(mlp: &Mlp, cluster: &[usize], layer: usize) -> Result<f64> {
    if layer == 0 || layer > mlp.layers.len() {
        return Err(Error::LayerOutOfRange {
            layer,
            max: mlp.layers.len(),
        });
    }
    let bias = mlp.bias(layer);
    check_cluster(cluster, bias.len())?;
    Ok(cluster.iter().map(|&i| bias[i]).sum::<f64>() / cluster.len() as f64)
}

/// Global edge weight between `c1` in layer `layer` and `c2` in layer
/// `layer + 1`: `Σ_{i∈C1} (1/|C2|) Σ_{j∈C2} W_{j,i}`.
pub fn aggregate_edge_global(mlp: &Mlp, c1: &[usize], c2: &[usize], layer: usize) -> Result<f64> {
    let w = mlp.layers.get(layer).ok_or(Error::LayerOutOfRange {
        layer,
        max: mlp.layers.len() - 1,
    })?;
    check_cluster(c1, w.inputs())?;
    check_cluster(c2, w.outputs())?;
    Ok(global_edge(w, c1, c2))
}

fn global_edge(w: &Layer, c1: &[usize], c2: &[usize]) -> f64 {
    let inv = 1.0 / c2.len() as f64;
    c1.iter()
        .map(|&i| inv * c2.iter().map(|&j| w.weights[j][i]).sum::<f64>())
        .sum()
}

/// Per-sample factors `f_k` such that the local edge weight is
/// `Σ_k f_k · flow(k)`. Samples whose cluster activation is below
/// [`DEAD_ACTIVATION`] get a zero factor; if no sample is live every factor
/// is zero.
fn sample_factors(cluster_acts: &[f64], kernel: &[f64], estimator: LocalEstimator) -> Vec<f64> {
    let live = |a: f64| a.abs() >= DEAD_ACTIVATION;
    let z: f64 = cluster_acts
        .iter()
        .zip(kernel)
        .filter(|(a, _)| live(**a))
        .map(|(a, p)| match estimator {
            LocalEstimator::LeastSquares => p * a * a,
            LocalEstimator::PerSample => *p,
        })
        .sum();
    cluster_acts
        .iter()
        .zip(kernel)
        .map(|(&a, &p)| {
            if z <= 0.0 || !live(a) {
                0.0
            } else {
                match estimator {
                    LocalEstimator::LeastSquares => p * a / z,
                    LocalEstimator::PerSample => p / (z * a),
                }
            }
        })
        .collect()
}

/// Local edge weight from per-sample activations.
///
/// `member_acts[k]` holds the original network's activations of the source
/// layer on sample `k` and `cluster_acts[k]` the activation of the source
/// cluster-neuron in the partially built clustered network. Samples whose
/// cluster activation is below [`DEAD_ACTIVATION`] are skipped; the kernel
/// weights of the remaining samples are normalised to sum to one.
pub fn aggregate_edge_local(
    layer: &Layer,
    c1: &[usize],
    c2: &[usize],
    member_acts: &[Vec<f64>],
    cluster_acts: &[f64],
    kernel_weights: &[f64],
    estimator: LocalEstimator,
) -> Result<f64> {
    check_cluster(c1, layer.inputs())?;
    check_cluster(c2, layer.outputs())?;
    if member_acts.len() != kernel_weights.len() || cluster_acts.len() != kernel_weights.len() {
        return Err(Error::LengthMismatch {
            expected: kernel_weights.len(),
            got: member_acts.len().min(cluster_acts.len()),
        });
    }
    let factors = sample_factors(cluster_acts, kernel_weights, estimator);
    // Σ_{j∈C2} W_{j,i} / |C2|, shared by every sample.
    let inv_c2 = 1.0 / c2.len() as f64;
    let column_sums: Vec<f64> = c1
        .iter()
        .map(|&i| inv_c2 * c2.iter().map(|&j| layer.weights[j][i]).sum::<f64>())
        .collect();
    Ok(member_acts
        .iter()
        .zip(&factors)
        .filter(|(_, f)| **f != 0.0)
        .map(|(acts, f)| f * c1.iter().zip(&column_sums).map(|(&i, s)| s * acts[i]).sum::<f64>())
        .sum())
}

/// Builds a locally aggregated clustered network one layer at a time.
pub struct LocalAggregator<'a> {
    mlp: &'a Mlp,
    sizes: Vec<usize>,
    partition: &'a Partition,
    kernel: &'a [f64],
    estimator: LocalEstimator,
    traces: Vec<ActivationTrace>,
    /// Activations of the clustered network's current source layer, per sample.
    cluster_acts: Vec<Vec<f64>>,
    next: usize,
    built: Vec<Layer>,
}

impl<'a> LocalAggregator<'a> {
    pub fn new(
        mlp: &'a Mlp,
        partition: &'a Partition,
        nb: &'a Neighborhood,
        estimator: LocalEstimator,
    ) -> Result<Self> {
        partition.validate(&hidden_sizes(mlp))?;
        if nb.samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let traces = nb.samples.iter().map(|x| mlp.forward(x)).collect::<Result<Vec<_>>>()?;
        Ok(LocalAggregator {
            mlp,
            sizes: mlp.layer_sizes(),
            partition,
            kernel: &nb.kernel_weights,
            estimator,
            cluster_acts: nb.samples.clone(),
            traces,
            next: 0,
            built: Vec::new(),
        })
    }

    /// Source layer whose outgoing edges are aggregated next.
    pub fn next_layer(&self) -> usize {
        self.next
    }

    /// Weight of the edge from cluster `c1` of layer `layer` to cluster `c2`
    /// of layer `layer + 1`. Only the next unbuilt layer may be queried.
    pub fn edge(&self, layer: usize, c1: usize, c2: usize) -> Result<f64> {
        if layer != self.next {
            return Err(Error::ConstructionOrder {
                expected: self.next,
                got: layer,
            });
        }
        let from = clusters_at(&self.sizes, self.partition, layer);
        let to = clusters_at(&self.sizes, self.partition, layer + 1);
        let (Some(c1s), Some(c2s)) = (from.get(c1), to.get(c2)) else {
            return Err(Error::InconsistentPartition(format!(
                "no cluster pair ({c1}, {c2}) between layers {layer} and {}",
                layer + 1
            )));
        };
        let member_acts: Vec<Vec<f64>> = self.traces.iter().map(|t| t.layers[layer].clone()).collect();
        let cluster_acts: Vec<f64> = self.cluster_acts.iter().map(|a| a[c1]).collect();
        aggregate_edge_local(
            &self.mlp.layers[layer],
            c1s,
            c2s,
            &member_acts,
            &cluster_acts,
            self.kernel,
            self.estimator,
        )
    }

    /// Fix the weights and biases of the next layer and advance.
    pub fn finish_layer(&mut self) -> Result<()> {
        let l = self.next;
        if l >= self.mlp.layers.len() {
            return Err(Error::ConstructionOrder {
                expected: self.mlp.layers.len(),
                got: l,
            });
        }
        let from = clusters_at(&self.sizes, self.partition, l);
        let to = clusters_at(&self.sizes, self.partition, l + 1);
        let w = &self.mlp.layers[l];
        let mut layer = Layer::zeros(from.len(), to.len());
        for (b, c2) in to.iter().enumerate() {
            layer.bias[b] = aggregate_bias(self.mlp, c2, l + 1)?;
        }
        for (a, c1) in from.iter().enumerate() {
            let cluster_acts: Vec<f64> = self.cluster_acts.iter().map(|acts| acts[a]).collect();
            let factors = sample_factors(&cluster_acts, self.kernel, self.estimator);
            // Σ_k f_k a_i(k) for every member i of C1.
            let mut weighted = vec![0.0; c1.len()];
            for (trace, &f) in self.traces.iter().zip(&factors) {
                if f == 0.0 {
                    continue;
                }
                for (acc, &i) in weighted.iter_mut().zip(c1) {
                    *acc += f * trace.layers[l][i];
                }
            }
            for (b, c2) in to.iter().enumerate() {
                let inv = 1.0 / c2.len() as f64;
                layer.weights[b][a] = c1
                    .iter()
                    .zip(&weighted)
                    .map(|(&i, s)| s * inv * c2.iter().map(|&j| w.weights[j][i]).sum::<f64>())
                    .sum();
            }
        }
        if l + 1 < self.mlp.layers.len() {
            let act = self.mlp.activation;
            self.cluster_acts = self
                .cluster_acts
                .iter()
                .map(|a| layer.pre_activation(a).into_iter().map(|z| act.apply(z)).collect())
                .collect();
        }
        self.built.push(layer);
        self.next += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<Vec<Layer>> {
        while self.next < self.mlp.layers.len() {
            self.finish_layer()?;
        }
        Ok(self.built)
    }
}

/// Default display names: `C1, C2, ...` for a single hidden layer, otherwise
/// `C<layer>.<index>`.
pub fn default_cluster_labels(partition: &Partition) -> Vec<Vec<String>> {
    let single = partition.layers.len() == 1;
    partition
        .layers
        .iter()
        .enumerate()
        .map(|(l, clusters)| {
            (0..clusters.len())
                .map(|j| {
                    if single {
                        format!("C{}", j + 1)
                    } else {
                        format!("C{}.{}", l + 1, j + 1)
                    }
                })
                .collect()
        })
        .collect()
}

/// Clustered network for `partition` under the chosen aggregation.
pub fn build_clustered(mlp: &Mlp, partition: &Partition, aggregation: Aggregation<'_>) -> Result<ClusteredMlp> {
    partition.validate(&hidden_sizes(mlp))?;
    let sizes = mlp.layer_sizes();
    let (layers, mode) = match aggregation {
        Aggregation::Global => {
            let mut layers = Vec::with_capacity(mlp.layers.len());
            for l in 0..mlp.layers.len() {
                let from = clusters_at(&sizes, partition, l);
                let to = clusters_at(&sizes, partition, l + 1);
                let mut layer = Layer::zeros(from.len(), to.len());
                for (b, c2) in to.iter().enumerate() {
                    layer.bias[b] = aggregate_bias(mlp, c2, l + 1)?;
                    for (a, c1) in from.iter().enumerate() {
                        layer.weights[b][a] = global_edge(&mlp.layers[l], c1, c2);
                    }
                }
                layers.push(layer);
            }
            (layers, ClusterMode::Global)
        }
        Aggregation::Local(nb, estimator) => {
            if nb.anchor.len() != mlp.n_inputs() {
                return Err(Error::InputShape {
                    expected: mlp.n_inputs(),
                    got: nb.anchor.len(),
                });
            }
            let layers = LocalAggregator::new(mlp, partition, nb, estimator)?.finish()?;
            (
                layers,
                ClusterMode::Local {
                    anchor: nb.anchor.clone(),
                    kernel_width: nb.kernel_width,
                    samples: nb.samples.len(),
                    kernel_normalization: KERNEL_NORMALIZATION.into(),
                    estimator,
                },
            )
        }
    };
    let inner = Mlp {
        layers,
        activation: mlp.activation,
        output_head: mlp.output_head,
        feature_names: mlp.feature_names.clone(),
        class_names: mlp.class_names.clone(),
    };
    inner.validate()?;
    Ok(ClusteredMlp {
        inner,
        partition: partition.clone(),
        mode,
        cluster_labels: default_cluster_labels(partition),
    })
}
