//! Pearson correlation matrix over feature columns.

use ndarray::{Array2, ArrayView2};

/// Symmetric D x D correlation matrix with unit diagonal. Constant columns
/// get correlation 0 against everything (reported via the returned warnings)
/// rather than aborting the report.
pub fn pearson_matrix(matrix: ArrayView2<f64>) -> (Array2<f64>, Vec<String>) {
    let n = matrix.nrows();
    let d = matrix.ncols();
    assert!(n >= 2, "need at least two rows for correlations");

    let mut warnings = Vec::new();
    let means: Vec<f64> = (0..d).map(|j| matrix.column(j).sum() / n as f64).collect();
    let mut centered = matrix.to_owned();
    for mut row in centered.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v -= means[j];
        }
    }
    let sds: Vec<f64> = (0..d)
        .map(|j| centered.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for (j, sd) in sds.iter().enumerate() {
        if *sd <= 1e-12 {
            warnings.push(format!("column {j} is constant; correlations reported as 0"));
        }
    }

    let mut out = Array2::zeros((d, d));
    for i in 0..d {
        out[[i, i]] = 1.0;
        for j in (i + 1)..d {
            let r = if sds[i] <= 1e-12 || sds[j] <= 1e-12 {
                0.0
            } else {
                let cov: f64 = centered
                    .column(i)
                    .iter()
                    .zip(centered.column(j))
                    .map(|(a, b)| a * b)
                    .sum();
                (cov / (sds[i] * sds[j])).clamp(-1.0, 1.0)
            };
            out[[i, j]] = r;
            out[[j, i]] = r;
        }
    }
    (out, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn self_correlation_is_one_and_negation_is_minus_one() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let data: Vec<f64> = xs.iter().flat_map(|&x| [x, -x]).collect();
        let m = Array2::from_shape_vec((5, 2), data).unwrap();
        let (r, warnings) = pearson_matrix(m.view());
        assert!(warnings.is_empty());
        assert_eq!(r[[0, 0]], 1.0);
        assert_eq!(r[[1, 1]], 1.0);
        assert!((r[[0, 1]] + 1.0).abs() < 1e-12);
        assert_eq!(r[[0, 1]], r[[1, 0]]);
    }

    #[test]
    fn constant_column_warns_and_yields_zero() {
        let m = Array2::from_shape_vec((3, 2), vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap();
        let (r, warnings) = pearson_matrix(m.view());
        assert_eq!(warnings.len(), 1);
        assert_eq!(r[[0, 1]], 0.0);
        assert_eq!(r[[1, 1]], 1.0);
    }
}
