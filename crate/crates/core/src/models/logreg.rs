//! Regularized logistic regression trained by (proximal) gradient descent.
//! L2 uses a plain gradient step on the penalty; L1 uses a soft-threshold
//! proximal step, which produces exact zeros.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::{log_loss, sigmoid, FittedParams, ModelError, ModelKind, TrainedModel, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LogRegParams {
    pub penalty: Penalty,
    /// Inverse regularization strength; smaller is stronger.
    pub c: f64,
    pub learning_rate: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            penalty: Penalty::L2,
            c: 1.0,
            learning_rate: 0.5,
            max_iter: 500,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Objective value at each recorded checkpoint; nonincreasing.
    pub loss_trace: Vec<f64>,
}

impl LogRegModel {
    pub fn predict_proba(&self, features: ArrayView2<f64>) -> Vec<f64> {
        let x = self.standardizer.transform(features);
        x.rows()
            .into_iter()
            .map(|row| {
                let z: f64 = row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>() + self.intercept;
                sigmoid(z)
            })
            .collect()
    }
}

/// Unpenalized mean log-loss and its analytic gradient (weights, intercept).
/// Kept separate from the training loop so it can be checked against finite
/// differences.
pub fn loss_and_grad(
    weights: &[f64],
    intercept: f64,
    features: ArrayView2<f64>,
    labels: &[f64],
) -> (f64, Vec<f64>, f64) {
    let n = features.nrows();
    let d = features.ncols();
    let mut probs = Vec::with_capacity(n);
    let mut grad_w = vec![0.0; d];
    let mut grad_b = 0.0;
    for (row, &y) in features.rows().into_iter().zip(labels) {
        let z: f64 = row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + intercept;
        let p = sigmoid(z);
        probs.push(p);
        let r = p - y;
        for (g, x) in grad_w.iter_mut().zip(row) {
            *g += r * x;
        }
        grad_b += r;
    }
    let inv_n = 1.0 / n as f64;
    for g in &mut grad_w {
        *g *= inv_n;
    }
    (log_loss(&probs, labels), grad_w, grad_b * inv_n)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn objective(loss: f64, weights: &[f64], penalty: Penalty, lambda: f64) -> f64 {
    let pen: f64 = match penalty {
        Penalty::L1 => weights.iter().map(|w| w.abs()).sum(),
        Penalty::L2 => 0.5 * weights.iter().map(|w| w * w).sum::<f64>(),
    };
    loss + lambda * pen
}

pub fn train_logreg(data: &TrainingSet, hp: &LogRegParams, _seed: u64) -> Result<TrainedModel, ModelError> {
    data.validate()?;
    let standardizer = Standardizer::fit(data.features.view());
    let x = standardizer.transform(data.features.view());
    let y = data.labels_f64();
    let n = x.nrows();
    let d = x.ncols();
    // sklearn-style scaling: minimize mean log-loss + penalty/(c*n)
    let lambda = 1.0 / (hp.c * n as f64);

    let mut weights = vec![0.0; d];
    let mut intercept = 0.0;
    let mut lr = hp.learning_rate;
    let (loss0, _, _) = loss_and_grad(&weights, intercept, x.view(), &y);
    let mut current = objective(loss0, &weights, hp.penalty, lambda);
    let mut trace = vec![current];

    for _ in 0..hp.max_iter {
        let (_, grad_w, grad_b) = loss_and_grad(&weights, intercept, x.view(), &y);
        // backtrack until the step does not increase the objective
        let mut stepped = false;
        for _ in 0..60 {
            let mut w_new = vec![0.0; d];
            for j in 0..d {
                match hp.penalty {
                    Penalty::L1 => {
                        w_new[j] = soft_threshold(weights[j] - lr * grad_w[j], lr * lambda);
                    }
                    Penalty::L2 => {
                        w_new[j] = weights[j] - lr * (grad_w[j] + lambda * weights[j]);
                    }
                }
            }
            let b_new = intercept - lr * grad_b;
            let (loss_new, _, _) = loss_and_grad(&w_new, b_new, x.view(), &y);
            if !loss_new.is_finite() {
                return Err(ModelError::NonFinite);
            }
            let obj_new = objective(loss_new, &w_new, hp.penalty, lambda);
            if obj_new <= current {
                weights = w_new;
                intercept = b_new;
                let delta = current - obj_new;
                current = obj_new;
                trace.push(current);
                stepped = true;
                if delta < hp.tol {
                    return Ok(finish(data, hp, standardizer, weights, intercept, trace));
                }
                break;
            }
            lr *= 0.5;
        }
        if !stepped {
            break; // step size exhausted; converged to machine precision
        }
    }
    Ok(finish(data, hp, standardizer, weights, intercept, trace))
}

fn finish(
    data: &TrainingSet,
    hp: &LogRegParams,
    standardizer: Standardizer,
    weights: Vec<f64>,
    intercept: f64,
    loss_trace: Vec<f64>,
) -> TrainedModel {
    TrainedModel {
        version: super::MODEL_ARTIFACT_VERSION,
        kind: ModelKind::LogReg,
        hyper_params: super::HyperParams::LogReg(hp.clone()),
        feature_names: data.feature_names.clone(),
        threshold: 0.5,
        params: FittedParams::LogReg(LogRegModel {
            standardizer,
            weights,
            intercept,
            loss_trace,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn toy_separable() -> TrainingSet {
        let xs = [-2.0, -1.5, -0.7, -0.1, 0.2, 0.9, 1.4, 2.2];
        let features = Array2::from_shape_vec((8, 2), xs.iter().flat_map(|&x| [x, 0.3 * x + 1.0]).collect()).unwrap();
        TrainingSet {
            labels: xs.iter().map(|&x| x > 0.0).collect(),
            features,
            feature_names: vec!["x1".into(), "x2".into()],
        }
    }

    #[test]
    fn separable_data_reaches_full_accuracy() {
        let set = toy_separable();
        let model = train_logreg(&set, &LogRegParams { c: 100.0, ..Default::default() }, 0).unwrap();
        let preds = model.classify(set.features.view()).unwrap();
        assert_eq!(preds, set.labels);
    }

    #[test]
    fn constant_features_give_base_rate_intercept() {
        let features = Array2::from_elem((10, 2), 3.0);
        let labels: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let set = TrainingSet {
            features,
            labels,
            feature_names: vec!["a".into(), "b".into()],
        };
        let hp = LogRegParams { tol: 1e-12, ..Default::default() };
        let model = train_logreg(&set, &hp, 0).unwrap();
        let FittedParams::LogReg(m) = &model.params else { unreachable!() };
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
        let expected = (0.3f64 / 0.7).ln();
        assert!((m.intercept - expected).abs() < 1e-3, "intercept {} vs {}", m.intercept, expected);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = crate::seed::rng_for(13, "logreg-grad", 0);
        let features = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));
        let labels: Vec<f64> = (0..5).map(|_| f64::from(rng.gen_range(0..2))).collect();
        let weights: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let intercept = 0.2;
        let (_, grad_w, grad_b) = loss_and_grad(&weights, intercept, features.view(), &labels);

        let h = 1e-6;
        for j in 0..3 {
            let mut wp = weights.clone();
            let mut wm = weights.clone();
            wp[j] += h;
            wm[j] -= h;
            let (lp, _, _) = loss_and_grad(&wp, intercept, features.view(), &labels);
            let (lm, _, _) = loss_and_grad(&wm, intercept, features.view(), &labels);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad_w[j] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel <= 1e-5, "weight {j}: analytic {} vs fd {}", grad_w[j], fd);
        }
        let (lp, _, _) = loss_and_grad(&weights, intercept + h, features.view(), &labels);
        let (lm, _, _) = loss_and_grad(&weights, intercept - h, features.view(), &labels);
        let fd = (lp - lm) / (2.0 * h);
        assert!((grad_b - fd).abs() / fd.abs().max(1e-8) <= 1e-5);
    }

    #[test]
    fn l1_with_small_c_zeroes_redundant_weights() {
        // second and third features are pure noise
        let mut rng = crate::seed::rng_for(5, "logreg-l1", 0);
        let n = 200;
        let mut data = Vec::with_capacity(n * 3);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen_range(-2.0..2.0);
            data.extend([x, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            labels.push(x > 0.0);
        }
        let set = TrainingSet {
            features: Array2::from_shape_vec((n, 3), data).unwrap(),
            labels,
            feature_names: vec!["signal".into(), "noise1".into(), "noise2".into()],
        };
        let hp = LogRegParams {
            penalty: Penalty::L1,
            c: 0.02,
            ..Default::default()
        };
        let model = train_logreg(&set, &hp, 0).unwrap();
        let FittedParams::LogReg(m) = &model.params else { unreachable!() };
        assert!(m.weights[0].abs() > 0.1, "signal weight survived: {:?}", m.weights);
        assert_eq!(m.weights[1], 0.0);
        assert_eq!(m.weights[2], 0.0);
    }

    #[test]
    fn loss_trace_is_nonincreasing() {
        let set = toy_separable();
        let model = train_logreg(&set, &LogRegParams::default(), 0).unwrap();
        let FittedParams::LogReg(m) = &model.params else { unreachable!() };
        for w in m.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}
