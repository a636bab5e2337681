//! Fully connected feed-forward networks and the portable weight format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::{logistic, softmax, Activation};
use crate::error::{Error, Result};

/// How the output layer turns pre-activations into outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputHead {
    /// Same component-wise activation as the hidden layers.
    #[serde(rename = "same")]
    SameAsHidden,
    /// Softmax over the output pre-activations. A single output neuron is read
    /// as a binary classifier and uses the logistic function instead.
    #[serde(rename = "softmax")]
    Softmax,
}

impl OutputHead {
    pub fn is_component_wise(self) -> bool {
        matches!(self, OutputHead::SameAsHidden)
    }
}

/// Weights into one layer: `weights[i][j]` connects neuron `j` of the previous
/// layer to neuron `i` of this layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            weights: vec![vec![0.0; inputs]; outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    /// `W x + b`.
    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// `layers[l]` maps layer `l` to layer `l + 1`; there are `d + 1` of them.
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub output_head: OutputHead,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

/// Activation values of every neuron for one input. `layers[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layers: Vec<Vec<f64>>,
    /// Output-layer pre-activations (before the output head).
    pub logits: Vec<f64>,
}

impl ActivationTrace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("trace always has an input layer")
    }
}

impl Mlp {
    pub fn new(
        layers: Vec<Layer>,
        activation: Activation,
        output_head: OutputHead,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let mlp = Mlp {
            layers,
            activation,
            output_head,
            feature_names,
            class_names,
        };
        mlp.validate()?;
        Ok(mlp)
    }

    /// Network with zero weights and biases and default names.
    pub fn zeros(layer_sizes: &[usize], activation: Activation, output_head: OutputHead) -> Self {
        let layers = layer_sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Mlp {
            layers,
            activation,
            output_head,
            feature_names: default_names("x", layer_sizes[0]),
            class_names: default_names("y", *layer_sizes.last().unwrap()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidModel("network has no layers".into()));
        }
        let sizes = self.layer_sizes();
        if sizes.contains(&0) {
            return Err(Error::InvalidModel(format!(
                "layer sizes must be positive, got {sizes:?}"
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.bias.len() {
                return Err(Error::InvalidModel(format!(
                    "layer {l}: {} weight rows but {} biases",
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
            if l > 0 && layer.inputs() != self.layers[l - 1].outputs() {
                return Err(Error::InvalidModel(format!(
                    "layer {l} expects {} inputs but layer {} has {} neurons",
                    layer.inputs(),
                    l,
                    self.layers[l - 1].outputs()
                )));
            }
            if let Some(i) = layer.weights.iter().position(|r| r.len() != layer.inputs()) {
                return Err(Error::InvalidModel(format!("layer {l}: ragged weight row {i}")));
            }
        }
        if self.feature_names.len() != sizes[0] {
            return Err(Error::InvalidModel(format!(
                "{} feature names for {} inputs",
                self.feature_names.len(),
                sizes[0]
            )));
        }
        if self.class_names.len() != *sizes.last().unwrap() {
            return Err(Error::InvalidModel(format!(
                "{} class names for {} outputs",
                self.class_names.len(),
                sizes.last().unwrap()
            )));
        }
        Ok(())
    }

    /// `[|V_0|, |V_1|, ..., |V_{d+1}|]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.layers.len() + 1);
        sizes.push(self.layers.first().map_or(0, Layer::inputs));
        sizes.extend(self.layers.iter().map(Layer::outputs));
        sizes
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    /// Biases of layer `l` (1-based, `1..=d+1`).
    pub fn bias(&self, l: usize) -> &[f64] {
        &self.layers[l - 1].bias
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::InputShape {
                expected: self.n_inputs(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn apply_head(&self, logits: &[f64]) -> Vec<f64> {
        match self.output_head {
            OutputHead::SameAsHidden => logits.iter().map(|&z| self.activation.apply(z)).collect(),
            OutputHead::Softmax if logits.len() == 1 => vec![logistic(logits[0])],
            OutputHead::Softmax => softmax(logits),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ActivationTrace> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> ActivationTrace {
        let mut layers = Vec::with_capacity(self.layers.len() + 1);
        layers.push(x.to_vec());
        let d = self.depth();
        for layer in &self.layers[..d] {
            let z = layer.pre_activation(layers.last().unwrap());
            layers.push(z.into_iter().map(|v| self.activation.apply(v)).collect());
        }
        let logits = self.layers[d].pre_activation(layers.last().unwrap());
        layers.push(self.apply_head(&logits));
        ActivationTrace { layers, logits }
    }

    /// Outputs after the output head.
    pub fn outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x).map(|t| t.layers.last().unwrap().clone())
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let out = self.outputs(x)?;
        Ok(argmax_class(&out))
    }

    /// Rows are the neurons of hidden layer `layer`, columns the samples.
    pub fn activation_matrix(&self, dataset: &[Vec<f64>], layer: usize) -> Result<Vec<Vec<f64>>> {
        if layer == 0 || layer > self.depth() {
            return Err(Error::LayerOutOfRange {
                layer,
                max: self.depth(),
            });
        }
        let mut matrix = vec![Vec::with_capacity(dataset.len()); self.layer_sizes()[layer]];
        for x in dataset {
            let trace = self.forward(x)?;
            for (row, &v) in matrix.iter_mut().zip(&trace.layers[layer]) {
                row.push(v);
            }
        }
        Ok(matrix)
    }

    /// Fold an input affine map `x = offset + scale ⊙ u` into the first layer so
    /// the returned network takes `u`.
    pub fn with_input_affine(&self, offset: &[f64], scale: &[f64]) -> Mlp {
        let mut out = self.clone();
        let first = &mut out.layers[0];
        for (row, b) in first.weights.iter_mut().zip(first.bias.iter_mut()) {
            *b += row.iter().zip(offset).map(|(w, o)| w * o).sum::<f64>();
            for (w, s) in row.iter_mut().zip(scale) {
                *w *= s;
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&WeightFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            field: json_field_hint(&e),
            message: e.to_string(),
        })?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Index of the predicted class from post-head outputs.
pub fn argmax_class(outputs: &[f64]) -> usize {
    if outputs.len() == 1 {
        return usize::from(outputs[0] > 0.5);
    }
    let mut best = 0;
    for (i, &v) in outputs.iter().enumerate() {
        if v > outputs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn json_field_hint(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    // serde reports missing/unknown fields as "missing field `x`"
    msg.split('`').nth(1).unwrap_or("document").to_string()
}

/// On-disk layout of a model.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightFile {
    layer_sizes: Vec<usize>,
    activation: String,
    output_head: String,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl From<&Mlp> for WeightFile {
    fn from(m: &Mlp) -> Self {
        WeightFile {
            layer_sizes: m.layer_sizes(),
            activation: m.activation.name().into(),
            output_head: match m.output_head {
                OutputHead::SameAsHidden => "same".into(),
                OutputHead::Softmax => "softmax".into(),
            },
            weights: m.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: m.layers.iter().map(|l| l.bias.clone()).collect(),
            feature_names: m.feature_names.clone(),
            class_names: m.class_names.clone(),
        }
    }
}

fn parse_err(field: String, message: impl Into<String>) -> Error {
    Error::Parse {
        field,
        message: message.into(),
    }
}

impl TryFrom<WeightFile> for Mlp {
    type Error = Error;

    fn try_from(f: WeightFile) -> Result<Self> {
        let activation: Activation = f.activation.parse()?;
        let output_head = match f.output_head.as_str() {
            "same" => OutputHead::SameAsHidden,
            "softmax" => OutputHead::Softmax,
            other => {
                return Err(parse_err(
                    "output_head".into(),
                    format!("unknown output head `{other}`; supported: same, softmax"),
                ))
            }
        };
        let sizes = &f.layer_sizes;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(parse_err(
                "layer_sizes".into(),
                "need at least two positive layer sizes",
            ));
        }
        let n_layers = sizes.len() - 1;
        if f.weights.len() != n_layers {
            return Err(parse_err(
                "weights".into(),
                format!("expected {n_layers} matrices, got {}", f.weights.len()),
            ));
        }
        if f.biases.len() != n_layers {
            return Err(parse_err(
                "biases".into(),
                format!("expected {n_layers} vectors, got {}", f.biases.len()),
            ));
        }
        for l in 0..n_layers {
            let w = &f.weights[l];
            if w.len() != sizes[l + 1] {
                return Err(parse_err(
                    format!("weights[{l}]"),
                    format!("expected {} rows, got {}", sizes[l + 1], w.len()),
                ));
            }
            for (i, row) in w.iter().enumerate() {
                if row.len() != sizes[l] {
                    return Err(parse_err(
                        format!("weights[{l}][{i}]"),
                        format!("expected {} entries, got {}", sizes[l], row.len()),
                    ));
                }
            }
            if f.biases[l].len() != sizes[l + 1] {
                return Err(parse_err(
                    format!("biases[{l}]"),
                    format!("expected {} entries, got {}", sizes[l + 1], f.biases[l].len()),
                ));
            }
        }
        if f.feature_names.len() != sizes[0] {
            return Err(parse_err(
                "feature_names".into(),
                format!("expected {} names, got {}", sizes[0], f.feature_names.len()),
            ));
        }
        if f.class_names.len() != sizes[n_layers] {
            return Err(parse_err(
                "class_names".into(),
                format!("expected {} names, got {}", sizes[n_layers], f.class_names.len()),
            ));
        }
        let layers = f
            .weights
            .into_iter()
            .zip(f.biases)
            .map(|(weights, bias)| Layer { weights, bias })
            .collect();
        Mlp::new(layers, activation, output_head, f.feature_names, f.class_names)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Relu network for XOR whose hidden neurons produce the activations
    /// (0,0,0,0), (1.7,0,1.8,0), (0,2.3,0,1.5), (0,0,0,0) on the four inputs.
    pub fn xor_net() -> Mlp {
        Mlp::new(
            vec![
                Layer {
                    weights: vec![vec![-1.7, 1.7], vec![2.3, -2.3], vec![-1.8, 1.8], vec![1.5, -1.5]],
                    bias: vec![0.0; 4],
                },
                Layer {
                    weights: vec![vec![0.3, 0.2, 0.25, 0.35]],
                    bias: vec![0.0],
                },
            ],
            Activation::Relu,
            OutputHead::SameAsHidden,
            vec!["x0".into(), "x1".into()],
            vec!["xor".into()],
        )
        .unwrap()
    }

    pub fn xor_inputs() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn zero_net_has_zero_hidden() {
        let net = Mlp::zeros(&[3, 4, 2], Activation::Relu, OutputHead::SameAsHidden);
        let t = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(t.layers[1], vec![0.0; 4]);
    }

    #[test]
    fn xor_hidden_traces() {
        let net = xor_net();
        let t = net.forward(&[0.0, 1.0]).unwrap();
        assert_close(&t.layers[1], &[1.7, 0.0, 1.8, 0.0]);
        let t = net.forward(&[1.0, 0.0]).unwrap();
        assert_close(&t.layers[1], &[0.0, 2.3, 0.0, 1.5]);
    }

    #[test]
    fn single_logistic_neuron() {
        let net = Mlp::new(
            vec![
                Layer {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                },
                Layer {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                },
            ],
            Activation::Logistic,
            OutputHead::SameAsHidden,
            vec!["x".into()],
            vec!["y".into()],
        )
        .unwrap();
        assert_eq!(net.forward(&[0.0]).unwrap().layers[1], vec![0.5]);
    }

    #[test]
    fn input_shape_error() {
        let err = xor_net().forward(&[1.0]).unwrap_err();
        assert!(matches!(err, Error::InputShape { expected: 2, got: 1 }));
    }

    #[test]
    fn xor_activation_matrix() {
        let m = xor_net().activation_matrix(&xor_inputs(), 1).unwrap();
        assert_close(&m[0], &[0.0, 1.7, 0.0, 0.0]);
        assert_close(&m[1], &[0.0, 0.0, 2.3, 0.0]);
        assert_close(&m[2], &[0.0, 1.8, 0.0, 0.0]);
        assert_close(&m[3], &[0.0, 0.0, 1.5, 0.0]);
    }

    #[test]
    fn activation_matrix_edges() {
        let net = xor_net();
        let empty = net.activation_matrix(&[], 1).unwrap();
        assert!(empty.iter().all(Vec::is_empty));
        let single = net.activation_matrix(&[vec![0.0, 1.0]], 1).unwrap();
        let trace = net.forward(&[0.0, 1.0]).unwrap();
        let column: Vec<f64> = single.iter().map(|r| r[0]).collect();
        assert_eq!(column, trace.layers[1]);
        assert!(matches!(
            net.activation_matrix(&xor_inputs(), 2),
            Err(Error::LayerOutOfRange { .. })
        ));
        assert!(net.activation_matrix(&xor_inputs(), 0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let mut net = xor_net();
        net.layers[0].weights[0][0] = 0.1 + 0.2;
        net.layers[1].bias[0] = -1.0 / 3.0;
        let back = Mlp::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn wrong_row_length_is_named() {
        let text = xor_net().to_json().unwrap().replacen("-1.7,", "-1.7, 9.0,", 1);
        let net_json: serde_json::Value = serde_json::from_str(&text).unwrap();
        let err = Mlp::from_json(&net_json.to_string()).unwrap_err().to_string();
        assert!(err.contains("weights[0][0]"), "{err}");
    }

    #[test]
    fn unknown_activation_is_rejected() {
        let text = xor_net().to_json().unwrap().replace("\"relu\"", "\"swish\"");
        let err = Mlp::from_json(&text).unwrap_err().to_string();
        assert!(
            err.contains("activation") && err.contains("logistic, tanh, relu"),
            "{err}"
        );
    }

    #[test]
    fn missing_field_is_named() {
        let err = Mlp::from_json(r#"{"layer_sizes":[1,1]}"#).unwrap_err().to_string();
        assert!(err.contains("activation"), "{err}");
    }

    #[test]
    fn affine_fold_matches_transformed_input() {
        let net = xor_net();
        let offset = [-1.0, 0.5];
        let scale = [2.0, 0.25];
        let folded = net.with_input_affine(&offset, &scale);
        let u = [0.3, 0.9];
        let x: Vec<f64> = (0..2).map(|i| offset[i] + scale[i] * u[i]).collect();
        assert_close(&folded.outputs(&u).unwrap(), &net.outputs(&x).unwrap());
    }

    proptest! {
        #[test]
        fn trace_layout_matches_sizes(x0 in -5.0f64..5.0, x1 in -5.0f64..5.0) {
            let net = xor_net();
            let t = net.forward(&[x0, x1]).unwrap();
            for (layer, size) in t.layers.iter().zip(net.layer_sizes()) {
                prop_assert_eq!(layer.len(), size);
            }
        }
    }
}
