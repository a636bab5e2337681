//! Minimal mini-batch gradient descent for producing small classifiers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::activation::{logistic, softmax, Activation};
use crate::dataset::Table;
use crate::error::{Error, Result};
use crate::model::{default_names, Layer, Mlp, OutputHead};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// He-initialized Relu network with a softmax head and zero biases.
pub fn initialize(layer_sizes: &[usize], seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_sizes
        .windows(2)
        .map(|w| {
            let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).unwrap();
            Layer {
                weights: (0..w[1])
                    .map(|_| (0..w[0]).map(|_| normal.sample(&mut rng)).collect())
                    .collect(),
                bias: vec![0.0; w[1]],
            }
        })
        .collect();
    Mlp {
        layers,
        activation: Activation::Relu,
        output_head: OutputHead::Softmax,
        feature_names: default_names("x", layer_sizes[0]),
        class_names: default_names("y", *layer_sizes.last().unwrap()),
    }
}

/// Train a Relu/softmax classifier on a labelled table.
///
/// `layer_sizes` includes input and output widths. The output width must equal
/// the number of classes, or be 1 for a binary problem.
pub fn train(table: &Table, layer_sizes: &[usize], config: &TrainConfig) -> Result<Mlp> {
    let labels = table
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("training requires a labelled table".into()))?;
    if table.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::Config(format!("invalid layer sizes {layer_sizes:?}")));
    }
    if layer_sizes[0] != table.n_features() {
        return Err(Error::InputShape {
            expected: layer_sizes[0],
            got: table.n_features(),
        });
    }
    let n_out = *layer_sizes.last().unwrap();
    let n_classes = table.n_classes().max(labels.iter().max().map_or(0, |m| m + 1));
    if !(n_out == n_classes || (n_out == 1 && n_classes <= 2)) {
        return Err(Error::Config(format!(
            "{n_out} output neurons cannot encode {n_classes} classes"
        )));
    }

    let mut mlp = initialize(layer_sizes, config.seed);
    mlp.feature_names = table.feature_names.clone();
    if table.class_names.len() == n_out {
        mlp.class_names = table.class_names.clone();
    } else if n_out == 1 {
        mlp.class_names = vec![table.class_names.get(1).cloned().unwrap_or_else(|| "y".into())];
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..table.rows.len()).collect();
    let batch = config.batch_size.max(1);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| table.rows[i].as_slice()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = loss_and_gradient(&mlp, &xs, &ys);
            epoch_loss += loss * chunk.len() as f64;
            for (layer, grad) in mlp.layers.iter_mut().zip(&grads) {
                for (row, grow) in layer.weights.iter_mut().zip(&grad.weights) {
                    for (w, g) in row.iter_mut().zip(grow) {
                        *w -= config.learning_rate * g;
                    }
                }
                for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
                    *b -= config.learning_rate * g;
                }
            }
        }
        let params_finite = mlp
            .layers
            .iter()
            .all(|l| l.bias.iter().chain(l.weights.iter().flatten()).all(|v| v.is_finite()));
        if !epoch_loss.is_finite() || !params_finite {
            return Err(Error::TrainingDiverged { epoch });
        }
    }
    Ok(mlp)
}

fn output_probabilities(logits: &[f64]) -> Vec<f64> {
    if logits.len() == 1 {
        vec![logistic(logits[0])]
    } else {
        softmax(logits)
    }
}

/// Mean cross-entropy over a batch and its gradient with respect to every
/// weight and bias. The output layer is always read as softmax logits (binary
/// logistic for a single output), whatever the network's declared head.
pub fn loss_and_gradient(mlp: &Mlp, xs: &[&[f64]], ys: &[usize]) -> (f64, Vec<Layer>) {
    let mut grads: Vec<Layer> = mlp
        .layers
        .iter()
        .map(|l| Layer::zeros(l.inputs(), l.outputs()))
        .collect();
    let n = xs.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let trace = mlp.forward_unchecked(x);
        let p = output_probabilities(&trace.logits);
        let mut delta: Vec<f64> = if p.len() == 1 {
            let target = if y == 1 { 1.0 } else { 0.0 };
            loss -= target * p[0].max(1e-300).ln() + (1.0 - target) * (1.0 - p[0]).max(1e-300).ln();
            vec![p[0] - target]
        } else {
            loss -= p[y].max(1e-300).ln();
            p.iter()
                .enumerate()
                .map(|(i, &pi)| pi - if i == y { 1.0 } else { 0.0 })
                .collect()
        };
        for l in (0..mlp.layers.len()).rev() {
            let input = &trace.layers[l];
            let g = &mut grads[l];
            for (i, &di) in delta.iter().enumerate() {
                g.bias[i] += di / n;
                for (gw, &a) in g.weights[i].iter_mut().zip(input) {
                    *gw += di * a / n;
                }
            }
            if l > 0 {
                let w = &mlp.layers[l].weights;
                delta = (0..input.len())
                    .map(|j| {
                        let back: f64 = delta.iter().enumerate().map(|(i, d)| d * w[i][j]).sum();
                        back * mlp.activation.derivative_from_output(input[j])
                    })
                    .collect();
            }
        }
    }
    (loss / n, grads)
}
