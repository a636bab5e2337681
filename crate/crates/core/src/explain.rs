//! Display artifacts for argumentation frameworks: top-k relevance
//! ("word-cloud") maps, edge pruning for readability and Graphviz export.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qaf::{Qaf, StrengthAssignment};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceEntry {
    /// Argument id of the contributing source.
    pub source: String,
    pub label: String,
    pub relevance: f64,
}

/// Top-k signed relevances of the parents of every non-input argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceMap {
    pub k: usize,
    /// Keyed by argument id; entries sorted by `|relevance|` descending.
    pub nodes: BTreeMap<String, Vec<RelevanceEntry>>,
}

impl RelevanceMap {
    pub fn get(&self, id: &str) -> Option<&[RelevanceEntry]> {
        self.nodes.get(id).map(Vec::as_slice)
    }

    /// `{"nodes":[{"id","entries":[{"label","relevance","sign"}]}],"k":k}`
    /// with relevance scaled by the node's largest magnitude into `[0, 1]`.
    pub fn word_cloud_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Entry<'a> {
            label: &'a str,
            relevance: f64,
            sign: i8,
        }
        #[derive(Serialize)]
        struct Node<'a> {
            id: &'a str,
            entries: Vec<Entry<'a>>,
        }
        #[derive(Serialize)]
        struct Cloud<'a> {
            nodes: Vec<Node<'a>>,
            k: usize,
        }
        let nodes = self
            .nodes
            .iter()
            .map(|(id, entries)| {
                let max = entries.iter().map(|e| e.relevance.abs()).fold(0.0, f64::max);
                Node {
                    id,
                    entries: entries
                        .iter()
                        .map(|e| Entry {
                            label: &e.label,
                            relevance: if max > 0.0 { e.relevance.abs() / max } else { 0.0 },
                            sign: if e.relevance > 0.0 {
                                1
                            } else if e.relevance < 0.0 {
                                -1
                            } else {
                                0
                            },
                        })
                        .collect(),
                }
            })
            .collect();
        Ok(serde_json::to_string_pretty(&Cloud { nodes, k: self.k })?)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("top-k must be at least 1".into()));
    }
    Ok(())
}

/// Order by magnitude, breaking ties by source id so the result does not
/// depend on edge order.
fn rank(mut entries: Vec<RelevanceEntry>, k: usize) -> Vec<RelevanceEntry> {
    entries.sort_by(|a, b| {
        b.relevance
            .abs()
            .total_cmp(&a.relevance.abs())
            .then_with(|| a.source.cmp(&b.source))
    });
    entries.truncate(k);
    entries
}

fn relevance_with(qaf: &Qaf, k: usize, score: impl Fn(&str, f64) -> Result<f64>) -> Result<RelevanceMap> {
    check_k(k)?;
    let labels: HashMap<&str, &str> = qaf
        .arguments
        .iter()
        .map(|a| (a.id.as_str(), a.label.as_str()))
        .collect();
    let mut incoming: BTreeMap<String, Vec<RelevanceEntry>> = qaf
        .arguments
        .iter()
        .filter(|a| a.layer > 0)
        .map(|a| (a.id.clone(), Vec::new()))
        .collect();
    for e in &qaf.edges {
        let label = labels
            .get(e.source.as_str())
            .ok_or_else(|| Error::UnknownArgument(e.source.clone()))?;
        let slot = incoming
            .get_mut(&e.target)
            .ok_or_else(|| Error::UnknownArgument(e.target.clone()))?;
        slot.push(RelevanceEntry {
            source: e.source.clone(),
            label: label.to_string(),
            relevance: score(&e.source, e.weight)?,
        });
    }
    Ok(RelevanceMap {
        k,
        nodes: incoming.into_iter().map(|(id, v)| (id, rank(v, k))).collect(),
    })
}

/// Relevance of a parent is its edge weight.
pub fn relevance_global(qaf: &Qaf, k: usize) -> Result<RelevanceMap> {
    relevance_with(qaf, k, |_, w| Ok(w))
}

/// Relevance of a parent is its edge weight times its final strength.
pub fn relevance_local(qaf: &Qaf, strengths: &StrengthAssignment, k: usize) -> Result<RelevanceMap> {
    relevance_with(qaf, k, |source, w| {
        strengths
            .get(source)
            .map(|s| w * s)
            .ok_or_else(|| Error::UnknownArgument(source.to_string()))
    })
}

/// Experimental: attribute each output argument to the input features by
/// composing relevances through the hidden layers. A hidden argument's
/// feature profile is its signed incoming relevance composed with its
/// parents' profiles, scaled to unit L1 norm; an output's profile is the
/// unscaled composition. Uses every edge, then keeps the top `k` features.
pub fn feature_attribution(qaf: &Qaf, strengths: Option<&StrengthAssignment>, k: usize) -> Result<RelevanceMap> {
    check_k(k)?;
    let full = match strengths {
        Some(s) => relevance_local(qaf, s, usize::MAX)?,
        None => relevance_global(qaf, usize::MAX)?,
    };
    let out_layer = qaf.output_layer();
    let inputs: Vec<_> = qaf.arguments.iter().filter(|a| a.layer == 0).collect();
    let position: HashMap<&str, usize> = inputs.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    let mut profile: HashMap<String, Vec<f64>> = HashMap::new();
    for a in &inputs {
        let mut v = vec![0.0; inputs.len()];
        v[position[a.id.as_str()]] = 1.0;
        profile.insert(a.id.clone(), v);
    }
    let mut by_layer: Vec<_> = qaf.arguments.iter().filter(|a| a.layer > 0).collect();
    by_layer.sort_by(|a, b| (a.layer, &a.id).cmp(&(b.layer, &b.id)));
    let mut nodes = BTreeMap::new();
    for a in by_layer {
        let mut v = vec![0.0; inputs.len()];
        for e in full.get(&a.id).unwrap_or(&[]) {
            if let Some(p) = profile.get(&e.source) {
                for (acc, x) in v.iter_mut().zip(p) {
                    *acc += e.relevance * x;
                }
            }
        }
        if a.layer == out_layer {
            let entries = inputs
                .iter()
                .zip(&v)
                .map(|(i, &r)| RelevanceEntry {
                    source: i.id.clone(),
                    label: i.label.clone(),
                    relevance: r,
                })
                .collect();
            nodes.insert(a.id.clone(), rank(entries, k));
        } else {
            let norm: f64 = v.iter().map(|x| x.abs()).sum();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            profile.insert(a.id.clone(), v);
        }
    }
    Ok(RelevanceMap { k, nodes })
}

/// Linearly interpolated percentile of `values` (sorted ascending).
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Drop edges whose `|weight|` falls below the given percentile of all edge
/// magnitudes. Each output argument keeps its strongest incoming edge.
pub fn prune_for_display(qaf: &Qaf, threshold_percentile: f64) -> Result<Qaf> {
    if !(0.0..=100.0).contains(&threshold_percentile) {
        return Err(Error::Config(format!(
            "percentile must lie in [0, 100], got {threshold_percentile}"
        )));
    }
    let mut out = qaf.clone();
    if qaf.edges.is_empty() {
        return Ok(out);
    }
    let out_layer = qaf.output_layer();
    let outputs: Vec<&str> = qaf
        .arguments
        .iter()
        .filter(|a| a.layer == out_layer && out_layer > 0)
        .map(|a| a.id.as_str())
        .collect();
    let mut protected: HashMap<&str, usize> = HashMap::new();
    for (i, e) in qaf.edges.iter().enumerate() {
        if !outputs.contains(&e.target.as_str()) {
            continue;
        }
        let better = match protected.get(e.target.as_str()) {
            None => true,
            Some(&j) => {
                let c = &qaf.edges[j];
                e.weight.abs() > c.weight.abs() || (e.weight.abs() == c.weight.abs() && e.source < c.source)
            }
        };
        if better {
            protected.insert(&e.target, i);
        }
    }
    let keep_index: Vec<usize> = protected.values().copied().collect();
    let mut mags: Vec<f64> = qaf.edges.iter().map(|e| e.weight.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let keep_all_above = threshold_percentile < 100.0;
    let threshold = percentile(&mags, threshold_percentile);
    out.edges = qaf
        .edges
        .iter()
        .enumerate()
        .filter(|(i, e)| keep_index.contains(i) || (keep_all_above && e.weight.abs() >= threshold))
        .map(|(_, e)| e.clone())
        .collect();
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz description laid out left to right by layer. Supports are
/// green, attacks red, pen width grows linearly with `|weight|` from 0.5 to
/// 5.0. Node labels show the base score and, when given, the strength and
/// top relevances.
pub fn export_dot(qaf: &Qaf, strengths: Option<&StrengthAssignment>, relevance: Option<&RelevanceMap>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph qaf {{");
    let _ = writeln!(s, "  rankdir=LR;");
    let _ = writeln!(s, "  node [shape=box, style=rounded, fontname=\"Helvetica\"];");
    let _ = writeln!(s, "  edge [arrowsize=0.6];");
    let last = qaf.output_layer();
    for l in 0..=last {
        let mut layer: Vec<_> = qaf.arguments.iter().filter(|a| a.layer == l).collect();
        if layer.is_empty() {
            continue;
        }
        layer.sort_by_key(|a| a.index);
        let _ = writeln!(s, "  subgraph layer_{l} {{");
        let _ = writeln!(s, "    rank=same;");
        for a in layer {
            let mut label = format!("{}\\nβ={:.3}", escape(&a.label), a.base_score);
            if let Some(sigma) = strengths.and_then(|st| st.get(&a.id)) {
                let _ = write!(label, "\\nσ={sigma:.3}");
            }
            if let Some(entries) = relevance.and_then(|r| r.get(&a.id)) {
                for e in entries {
                    let _ = write!(label, "\\n{} {:+.3}", escape(&e.label), e.relevance);
                }
            }
            let _ = writeln!(s, "    \"{}\" [label=\"{}\"];", escape(&a.id), label);
        }
        let _ = writeln!(s, "  }}");
    }
    let max = qaf.edges.iter().map(|e| e.weight.abs()).fold(0.0, f64::max);
    let mut edges: Vec<_> = qaf.edges.iter().collect();
    edges.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
    for e in edges {
        let width = if max > 0.0 {
            0.5 + 4.5 * e.weight.abs() / max
        } else {
            0.5
        };
        let color = if e.weight >= 0.0 { "green" } else { "red" };
        let _ = writeln!(
            s,
            "  \"{}\" -> \"{}\" [color={color}, penwidth={width:.3}, label=\"{:.3}\"];",
            escape(&e.source),
            escape(&e.target),
            e.weight
        );
    }
    s.push_str("}\n");
    s
}
