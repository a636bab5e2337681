//! Sparsification and argumentative explanation of multi-layer perceptrons.
//!
//! A trained [`Mlp`] is compressed by clustering the neurons of each hidden
//! layer on their activation profiles ([`cluster`]), collapsing every
//! cluster into a single neuron whose parameters are aggregated globally or
//! around one input ([`sparsify`]). Any such network reads as a quantitative
//! argumentation framework whose final strengths reproduce its forward pass
//! ([`qaf`]). [`metrics`] scores how faithful the compressed network is and
//! [`explain`] turns frameworks into display artifacts.

pub mod activation;
pub mod cluster;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod explain;
pub mod metrics;
pub mod model;
pub mod qaf;
pub mod seed;
pub mod sparsify;
pub mod train;

pub use activation::Activation;
pub use cluster::{partition_mlp, KMeansConfig, Partition};
pub use dataset::{sample_neighborhood, Neighborhood, Table};
pub use error::{Error, Result};
pub use evaluate::{evaluate, EvalConfig, EvalReport};
pub use explain::{export_dot, prune_for_display, relevance_global, relevance_local, RelevanceMap};
pub use metrics::FaithfulnessReport;
pub use model::{Layer, Mlp, OutputHead};
pub use qaf::{check_equivalence, final_strengths, translate, translate_auto, Network, Qaf, StrengthAssignment};
pub use seed::Seeds;
pub use sparsify::{build_clustered, Aggregation, ClusteredMlp, LocalEstimator};
pub use train::{train, TrainConfig};
