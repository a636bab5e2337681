//! Quantitative argumentation frameworks read off a network for one input.
//!
//! Every neuron becomes an argument; an input argument's base score is the
//! input value and every other argument's base score is the activation of its
//! bias. Edges keep the network's weights, negative ones acting as attacks and
//! positive ones as supports. Strengths are computed by summing weighted
//! parent strengths and applying `φ(b + α)`, where `b` is the recorded bias
//! (`φ⁻¹(β)` when absent), which on the acyclic graphs produced here
//! reproduces the forward pass exactly.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::model::Mlp;
use crate::sparsify::ClusteredMlp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub id: String,
    pub layer: usize,
    pub index: usize,
    pub base_score: f64,
    pub label: String,
    /// Pre-activation bias of a neuron argument. The influence step starts
    /// from it instead of `φ⁻¹(β)`, which cannot recover a negative bias under
    /// Relu or a saturated one under the logistic function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

impl Edge {
    pub fn is_attack(&self) -> bool {
        self.weight < 0.0
    }

    pub fn is_support(&self) -> bool {
        self.weight > 0.0
    }
}

/// Affine map `x = offset + scale ⊙ u` that brings inputs into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    /// Min-max scaling from per-feature bounds.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Self {
        let scale = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        InputScaling {
            offset: lo.to_vec(),
            scale,
        }
    }

    /// Smallest per-feature bounds containing both `[0, 1]` and `x`; the
    /// identity when `x` already lies in the unit box.
    pub fn covering(x: &[f64]) -> Self {
        let lo: Vec<f64> = x.iter().map(|v| v.min(0.0)).collect();
        let hi: Vec<f64> = x.iter().map(|v| v.max(1.0)).collect();
        Self::from_bounds(&lo, &hi)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| (v - o) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qaf {
    pub arguments: Vec<Argument>,
    pub edges: Vec<Edge>,
    pub activation: Activation,
    /// Output arguments use the identity instead of `activation` (the network
    /// had a softmax head; their strengths are the output logits).
    #[serde(default)]
    pub softmax_head: bool,
    /// Present when inputs were rescaled into the activation domain.
    #[serde(default)]
    pub input_scaling: Option<InputScaling>,
}

/// Final strength of every argument, keyed by argument id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthAssignment(pub BTreeMap<String, f64>);

impl StrengthAssignment {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.0.get(id).copied()
    }
}

/// Anything that can be read as a layered network with display labels.
pub trait Network {
    fn network(&self) -> &Mlp;
    /// Labels of hidden neurons, per hidden layer.
    fn hidden_labels(&self) -> Vec<Vec<String>>;
}

impl Network for Mlp {
    fn network(&self) -> &Mlp {
        self
    }

    fn hidden_labels(&self) -> Vec<Vec<String>> {
        let sizes = self.layer_sizes();
        (1..sizes.len() - 1)
            .map(|l| (0..sizes[l]).map(|i| format!("h{l}_{i}")).collect())
            .collect()
    }
}

impl Network for ClusteredMlp {
    fn network(&self) -> &Mlp {
        &self.inner
    }

    fn hidden_labels(&self) -> Vec<Vec<String>> {
        self.cluster_labels.clone()
    }
}

pub fn argument_id(layer: usize, index: usize) -> String {
    format!("A{layer}_{index}")
}

impl Qaf {
    pub fn output_layer(&self) -> usize {
        self.arguments.iter().map(|a| a.layer).max().unwrap_or(0)
    }

    pub fn argument(&self, id: &str) -> Option<&Argument> {
        self.arguments.iter().find(|a| a.id == id)
    }

    /// Activation governing `arg`'s influence step; `None` means identity.
    fn influence(&self, arg: &Argument, output_layer: usize) -> Option<Activation> {
        if self.softmax_head && arg.layer == output_layer && output_layer > 0 {
            None
        } else {
            Some(self.activation)
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Translate `net` at input `x`. Inputs must lie in the activation's domain.
pub fn translate<N: Network + ?Sized>(net: &N, x: &[f64]) -> Result<Qaf> {
    let mlp = net.network();
    if x.len() != mlp.n_inputs() {
        return Err(Error::InputShape {
            expected: mlp.n_inputs(),
            got: x.len(),
        });
    }
    let (lo, hi) = mlp.activation.domain();
    if let Some(i) = x.iter().position(|&v| !mlp.activation.in_domain(v)) {
        return Err(Error::Domain {
            argument: mlp.feature_names[i].clone(),
            value: x[i],
            lo,
            hi,
        });
    }
    Ok(build_qaf(mlp, &net.hidden_labels(), x, None))
}

/// Translate after mapping inputs through `scaling`; the map is folded into
/// the first layer so strengths still reproduce the network on `x`.
pub fn translate_scaled<N: Network + ?Sized>(net: &N, x: &[f64], scaling: &InputScaling) -> Result<Qaf> {
    let mlp = net.network();
    if x.len() != mlp.n_inputs() || scaling.offset.len() != x.len() || scaling.scale.len() != x.len() {
        return Err(Error::InputShape {
            expected: mlp.n_inputs(),
            got: x.len(),
        });
    }
    let u = scaling.apply(x);
    if let Some(i) = u.iter().position(|&v| !mlp.activation.in_domain(v)) {
        let (lo, hi) = mlp.activation.domain();
        return Err(Error::Domain {
            argument: mlp.feature_names[i].clone(),
            value: u[i],
            lo,
            hi,
        });
    }
    let folded = mlp.with_input_affine(&scaling.offset, &scaling.scale);
    Ok(build_qaf(&folded, &net.hidden_labels(), &u, Some(scaling.clone())))
}

/// Translate, rescaling inputs only when some lie outside the domain.
pub fn translate_auto<N: Network + ?Sized>(net: &N, x: &[f64]) -> Result<Qaf> {
    let act = net.network().activation;
    if x.iter().all(|&v| act.in_domain(v)) {
        translate(net, x)
    } else {
        translate_scaled(net, x, &InputScaling::covering(x))
    }
}

fn build_qaf(mlp: &Mlp, hidden_labels: &[Vec<String>], x: &[f64], scaling: Option<InputScaling>) -> Qaf {
    let sizes = mlp.layer_sizes();
    let last = sizes.len() - 1;
    let softmax_head = !mlp.output_head.is_component_wise();
    let mut arguments = Vec::with_capacity(sizes.iter().sum());
    for (i, &v) in x.iter().enumerate() {
        arguments.push(Argument {
            id: argument_id(0, i),
            layer: 0,
            index: i,
            base_score: v,
            label: mlp.feature_names[i].clone(),
            bias: None,
        });
    }
    for l in 1..=last {
        for (i, &b) in mlp.bias(l).iter().enumerate() {
            let base_score = if l == last && softmax_head {
                b
            } else {
                mlp.activation.apply(b)
            };
            let label = if l == last {
                mlp.class_names[i].clone()
            } else {
                hidden_labels
                    .get(l - 1)
                    .and_then(|ls| ls.get(i))
                    .cloned()
                    .unwrap_or_else(|| format!("h{l}_{i}"))
            };
            arguments.push(Argument {
                id: argument_id(l, i),
                layer: l,
                index: i,
                base_score,
                label,
                bias: Some(b),
            });
        }
    }
    let mut edges = Vec::new();
    for (l, layer) in mlp.layers.iter().enumerate() {
        for j in 0..layer.inputs() {
            for (i, row) in layer.weights.iter().enumerate() {
                if row[j] != 0.0 {
                    edges.push(Edge {
                        source: argument_id(l, j),
                        target: argument_id(l + 1, i),
                        weight: row[j],
                    });
                }
            }
        }
    }
    Qaf {
        arguments,
        edges,
        activation: mlp.activation,
        softmax_head,
        input_scaling: scaling,
    }
}

/// Final strengths by one pass in topological order.
pub fn final_strengths(qaf: &Qaf) -> Result<StrengthAssignment> {
    let n = qaf.arguments.len();
    let index: HashMap<&str, usize> = qaf
        .arguments
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id.as_str(), i))
        .collect();
    let mut parents: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for e in &qaf.edges {
        let s = *index
            .get(e.source.as_str())
            .ok_or_else(|| Error::UnknownArgument(e.source.clone()))?;
        let t = *index
            .get(e.target.as_str())
            .ok_or_else(|| Error::UnknownArgument(e.target.clone()))?;
        parents[t].push((s, e.weight));
        children[s].push(t);
        indegree[t] += 1;
    }

    // Kahn's algorithm; the ready set is kept ordered by (layer, index, id) so
    // the pass does not depend on the order arguments were stored in.
    let key = |i: usize| {
        let a = &qaf.arguments[i];
        (a.layer, a.index, a.id.clone())
    };
    let mut ready: std::collections::BTreeSet<(usize, usize, String, usize)> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| {
            let (l, x, id) = key(i);
            (l, x, id, i)
        })
        .collect();
    let output_layer = qaf.output_layer();
    let mut strength = vec![f64::NAN; n];
    let mut done = 0;
    while let Some(entry) = ready.pop_first() {
        let i = entry.3;
        let arg = &qaf.arguments[i];
        strength[i] = if parents[i].is_empty() {
            arg.base_score
        } else {
            let mut ps = parents[i].clone();
            ps.sort_by_key(|a| key(a.0));
            let aggregate: f64 = ps.iter().map(|&(p, w)| w * strength[p]).sum();
            match qaf.influence(arg, output_layer) {
                Some(act) => act.apply(arg.bias.unwrap_or_else(|| act.inverse(arg.base_score)) + aggregate),
                None => arg.bias.unwrap_or(arg.base_score) + aggregate,
            }
        };
        done += 1;
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                let (l, x, id) = key(c);
                ready.insert((l, x, id, c));
            }
        }
    }
    if done != n {
        return Err(Error::Cycle);
    }
    Ok(StrengthAssignment(
        qaf.arguments
            .iter()
            .zip(strength)
            .map(|(a, s)| (a.id.clone(), s))
            .collect(),
    ))
}

/// Attack (negative) and support (positive) edges.
pub fn attacks_and_supports(qaf: &Qaf) -> (Vec<&Edge>, Vec<&Edge>) {
    qaf.edges
        .iter()
        .filter(|e| e.weight != 0.0)
        .partition(|e| e.is_attack())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    pub max_deviation: f64,
    pub within_tolerance: bool,
}

/// Largest gap between neuron activations and argument strengths at `x`.
///
/// With a softmax head the output arguments are compared to the output
/// logits rather than the probabilities.
pub fn check_equivalence<N: Network + ?Sized>(net: &N, x: &[f64], tol: f64) -> Result<Equivalence> {
    let mlp = net.network();
    let trace = mlp.forward(x)?;
    let qaf = translate_auto(net, x)?;
    let strengths = final_strengths(&qaf)?;
    let inputs = match &qaf.input_scaling {
        Some(s) => s.apply(x),
        None => x.to_vec(),
    };
    let last = trace.layers.len() - 1;
    let mut max_deviation: f64 = 0.0;
    for (l, values) in trace.layers.iter().enumerate() {
        let values = if l == 0 {
            &inputs
        } else if l == last && qaf.softmax_head {
            &trace.logits
        } else {
            values
        };
        for (i, v) in values.iter().enumerate() {
            let s = strengths
                .get(&argument_id(l, i))
                .ok_or_else(|| Error::UnknownArgument(argument_id(l, i)))?;
            max_deviation = max_deviation.max((v - s).abs());
        }
    }
    Ok(Equivalence {
        max_deviation,
        within_tolerance: max_deviation <= tol,
    })
}
