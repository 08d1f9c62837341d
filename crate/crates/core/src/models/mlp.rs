//! Two-hidden-layer perceptron (D -> units_1 -> units_2 -> 1) with rectifier
//! activations and a sigmoid output, trained by mini-batch gradient descent
//! on log-loss. The backward pass is written so it can be checked against
//! central finite differences on a tiny network.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::{log_loss, sigmoid, FittedParams, ModelError, ModelKind, TrainedModel, TrainingSet};
use crate::seed::rng_for;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MlpParams {
    pub units_1: usize,
    pub units_2: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            units_1: 128,
            units_2: 64,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
        }
    }
}

/// Dense layer, weights in row-major (outputs x inputs).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub inputs: usize,
    pub outputs: usize,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Layer {
        Layer {
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            inputs,
            outputs,
        }
    }

    fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Layer {
        let scale = (6.0 / (inputs + outputs) as f64).sqrt();
        Layer {
            weights: (0..inputs * outputs).map(|_| rng.gen_range(-scale..scale)).collect(),
            biases: vec![0.0; outputs],
            inputs,
            outputs,
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.biases[o];
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Network {
    pub l1: Layer,
    pub l2: Layer,
    pub l3: Layer,
}

/// Gradients with the same shape as the network.
pub type Gradients = Network;

impl Network {
    pub fn zeros(d: usize, units_1: usize, units_2: usize) -> Network {
        Network {
            l1: Layer::zeros(d, units_1),
            l2: Layer::zeros(units_1, units_2),
            l3: Layer::zeros(units_2, 1),
        }
    }

    fn init(d: usize, units_1: usize, units_2: usize, seed: u64) -> Network {
        Network {
            l1: Layer::init(d, units_1, &mut rng_for(seed, "mlp-init", 1)),
            l2: Layer::init(units_1, units_2, &mut rng_for(seed, "mlp-init", 2)),
            l3: Layer::init(units_2, 1, &mut rng_for(seed, "mlp-init", 3)),
        }
    }

    pub fn forward_row(&self, input: &[f64]) -> f64 {
        let mut z1 = Vec::new();
        let mut z2 = Vec::new();
        let mut z3 = Vec::new();
        self.l1.forward(input, &mut z1);
        let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        self.l2.forward(&a1, &mut z2);
        let a2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();
        self.l3.forward(&a2, &mut z3);
        sigmoid(z3[0])
    }

    /// Mean log-loss over the batch and its gradient with respect to every
    /// weight and bias.
    pub fn loss_and_grad(&self, batch: &[(&[f64], f64)]) -> (f64, Gradients) {
        let mut grads = Network::zeros(self.l1.inputs, self.l1.outputs, self.l2.outputs);
        let inv_b = 1.0 / batch.len() as f64;
        let mut probs = Vec::with_capacity(batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        let (mut z1, mut z2, mut z3) = (Vec::new(), Vec::new(), Vec::new());

        for &(x, y) in batch {
            self.l1.forward(x, &mut z1);
            let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
            self.l2.forward(&a1, &mut z2);
            let a2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();
            self.l3.forward(&a2, &mut z3);
            let p = sigmoid(z3[0]);
            probs.push(p);
            labels.push(y);

            // output layer: dL/dz3 = (p - y) / B
            let dz3 = (p - y) * inv_b;
            for (k, &a) in a2.iter().enumerate() {
                grads.l3.weights[k] += dz3 * a;
            }
            grads.l3.biases[0] += dz3;

            // second hidden layer
            let mut dz2 = vec![0.0; self.l2.outputs];
            for (k, dz) in dz2.iter_mut().enumerate() {
                if z2[k] > 0.0 {
                    *dz = dz3 * self.l3.weights[k];
                }
            }
            for (o, &dz) in dz2.iter().enumerate() {
                if dz != 0.0 {
                    let row = &mut grads.l2.weights[o * self.l2.inputs..(o + 1) * self.l2.inputs];
                    for (g, &a) in row.iter_mut().zip(&a1) {
                        *g += dz * a;
                    }
                    grads.l2.biases[o] += dz;
                }
            }

            // first hidden layer
            let mut dz1 = vec![0.0; self.l1.outputs];
            for (k, dz) in dz1.iter_mut().enumerate() {
                if z1[k] > 0.0 {
                    let mut acc = 0.0;
                    for (o, &d2) in dz2.iter().enumerate() {
                        acc += d2 * self.l2.weights[o * self.l2.inputs + k];
                    }
                    *dz = acc;
                }
            }
            for (o, &dz) in dz1.iter().enumerate() {
                if dz != 0.0 {
                    let row = &mut grads.l1.weights[o * self.l1.inputs..(o + 1) * self.l1.inputs];
                    for (g, &xv) in row.iter_mut().zip(x) {
                        *g += dz * xv;
                    }
                    grads.l1.biases[o] += dz;
                }
            }
        }
        (log_loss(&probs, &labels), grads)
    }

    fn apply_step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in [(&mut self.l1, &grads.l1), (&mut self.l2, &grads.l2), (&mut self.l3, &grads.l3)] {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= lr * gb;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    pub standardizer: Standardizer,
    pub network: Network,
}

impl MlpModel {
    pub fn predict_proba(&self, features: ArrayView2<f64>) -> Vec<f64> {
        let x = self.standardizer.transform(features);
        x.rows()
            .into_iter()
            .map(|row| self.network.forward_row(row.as_slice().unwrap()))
            .collect()
    }
}

pub fn train_mlp(data: &TrainingSet, hp: &MlpParams, seed: u64) -> Result<TrainedModel, ModelError> {
    data.validate()?;
    if hp.units_1 == 0 || hp.units_2 == 0 || hp.batch_size == 0 {
        return Err(ModelError::InvalidData("layer and batch sizes must be positive".into()));
    }
    let standardizer = Standardizer::fit(data.features.view());
    let x = standardizer.transform(data.features.view());
    let y = data.labels_f64();
    let n = x.nrows();
    let d = x.ncols();

    let mut network = Network::init(d, hp.units_1, hp.units_2, seed);
    let mut order: Vec<usize> = (0..n).collect();
    let flat = x.as_slice().expect("standard-layout matrix");
    let rows: Vec<&[f64]> = flat.chunks(d).collect();

    for epoch in 0..hp.epochs {
        let mut rng = rng_for(seed, "mlp-epoch", epoch as u64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<(&[f64], f64)> = chunk.iter().map(|&i| (rows[i], y[i])).collect();
            let (loss, grads) = network.loss_and_grad(&batch);
            if !loss.is_finite() {
                return Err(ModelError::NonFinite);
            }
            network.apply_step(&grads, hp.learning_rate);
        }
    }

    Ok(TrainedModel {
        version: super::MODEL_ARTIFACT_VERSION,
        kind: ModelKind::Mlp,
        hyper_params: super::HyperParams::Mlp(hp.clone()),
        feature_names: data.feature_names.clone(),
        threshold: 0.5,
        params: FittedParams::Mlp(MlpModel { standardizer, network }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn zero_weight_network_outputs_half() {
        let net = Network::zeros(3, 4, 2);
        assert_eq!(net.forward_row(&[1.0, -2.0, 0.5]), 0.5);
    }

    /// Backprop against central differences on a 2-2-2-1 network.
    #[test]
    fn backprop_matches_finite_differences() {
        let mut net = Network::init(2, 2, 2, 99);
        // nudge biases off zero so no unit sits exactly on the relu kink
        for b in net.l1.biases.iter_mut().chain(net.l2.biases.iter_mut()) {
            *b = 0.13;
        }
        let samples: Vec<(Vec<f64>, f64)> = vec![
            (vec![0.4, -0.9], 1.0),
            (vec![-1.2, 0.3], 0.0),
            (vec![0.8, 0.7], 1.0),
        ];
        let batch: Vec<(&[f64], f64)> = samples.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let (_, grads) = net.loss_and_grad(&batch);

        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        let mut check = |net: &mut Network, pick: fn(&mut Network) -> &mut Vec<f64>, grad: &[f64]| {
            for (i, &gi) in grad.iter().enumerate() {
                let orig = pick(net)[i];
                pick(net)[i] = orig + h;
                let samples2: Vec<(&[f64], f64)> = samples.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
                let (lp, _) = net.loss_and_grad(&samples2);
                pick(net)[i] = orig - h;
                let (lm, _) = net.loss_and_grad(&samples2);
                pick(net)[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (gi - fd).abs() / fd.abs().max(1e-6);
                max_rel = max_rel.max(rel);
            }
        };
        check(&mut net, |n| &mut n.l1.weights, &grads.l1.weights);
        check(&mut net, |n| &mut n.l1.biases, &grads.l1.biases);
        check(&mut net, |n| &mut n.l2.weights, &grads.l2.weights);
        check(&mut net, |n| &mut n.l2.biases, &grads.l2.biases);
        check(&mut net, |n| &mut n.l3.weights, &grads.l3.weights);
        check(&mut net, |n| &mut n.l3.biases, &grads.l3.biases);
        assert!(max_rel <= 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn learns_a_simple_threshold() {
        let xs: Vec<f64> = (0..40).map(|i| f64::from(i) / 10.0 - 2.0).collect();
        let set = TrainingSet {
            features: Array2::from_shape_vec((40, 1), xs.clone()).unwrap(),
            labels: xs.iter().map(|&x| x > 0.0).collect(),
            feature_names: vec!["x".into()],
        };
        let hp = MlpParams {
            units_1: 8,
            units_2: 4,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 8,
        };
        let model = train_mlp(&set, &hp, 3).unwrap();
        let preds = model.classify(set.features.view()).unwrap();
        let correct = preds.iter().zip(&set.labels).filter(|(a, b)| a == b).count();
        assert!(correct >= 36, "only {correct}/40 correct");
    }

    #[test]
    fn same_seed_same_model() {
        let xs: Vec<f64> = (0..20).map(|i| f64::from(i) / 5.0 - 2.0).collect();
        let set = TrainingSet {
            features: Array2::from_shape_vec((20, 1), xs.clone()).unwrap(),
            labels: xs.iter().map(|&x| x > 0.0).collect(),
            feature_names: vec!["x".into()],
        };
        let hp = MlpParams { units_1: 4, units_2: 3, epochs: 10, ..Default::default() };
        let a = train_mlp(&set, &hp, 11).unwrap();
        let b = train_mlp(&set, &hp, 11).unwrap();
        let FittedParams::Mlp(ma) = &a.params else { unreachable!() };
        let FittedParams::Mlp(mb) = &b.params else { unreachable!() };
        assert_eq!(ma.network, mb.network);
    }
}
