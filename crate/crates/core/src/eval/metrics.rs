//! Confusion matrix and the four headline classification metrics.

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> MetricSet {
        let n = self.total() as f64;
        let accuracy = (self.tp + self.tn) as f64 / n;
        let precision = if self.tp + self.fp > 0 {
            self.tp as f64 / (self.tp + self.fp) as f64
        } else {
            0.0
        };
        let recall = if self.tp + self.fn_ > 0 {
            self.tp as f64 / (self.tp + self.fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MetricSet { accuracy, precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn compute_metrics(predicted: &[bool], actual: &[bool]) -> Result<(ConfusionMatrix, MetricSet), EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    let metrics = cm.metrics();
    Ok((cm, metrics))
}

/// Plain accuracy of boolean predictions; panics on length mismatch.
pub fn accuracy(predicted: &[bool], actual: &[bool]) -> f64 {
    assert_eq!(predicted.len(), actual.len());
    predicted.iter().zip(actual).filter(|(p, a)| p == a).count() as f64 / predicted.len() as f64
}
