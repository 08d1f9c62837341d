//! Per-feature standardization fitted on training data only and frozen into
//! the model, so test-time transforms never see test statistics.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: ArrayView2<f64>) -> Standardizer {
        let n = features.nrows() as f64;
        let d = features.ncols();
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        for j in 0..d {
            let col = features.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            means[j] = mean;
            // constant columns pass through unscaled
            stds[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        Standardizer { means, stds }
    }

    pub fn transform(&self, features: ArrayView2<f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        out
    }
}
