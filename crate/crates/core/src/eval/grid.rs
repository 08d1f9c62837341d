//! Grid search over hyperparameter candidates scored by mean fold accuracy
//! under stratified k-fold cross-validation. Ties go to the first candidate
//! in grid enumeration order; the winner is refit on the full training split.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::metrics::accuracy;
use super::split::stratified_kfold;
use super::EvalError;
use crate::models::{train, HyperParams, TrainedModel, TrainingSet};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCandidate {
    pub params: HyperParams,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub candidates: Vec<GridCandidate>,
    pub best_index: usize,
    pub best_params: HyperParams,
    pub best_score: f64,
    pub k: usize,
}

fn subset(features: ArrayView2<f64>, labels: &[bool], indices: &[usize]) -> (Array2<f64>, Vec<bool>) {
    let mut x = Array2::zeros((indices.len(), features.ncols()));
    let mut y = Vec::with_capacity(indices.len());
    for (r, &i) in indices.iter().enumerate() {
        x.row_mut(r).assign(&features.row(i));
        y.push(labels[i]);
    }
    (x, y)
}

pub fn grid_search(
    grid: &[HyperParams],
    features: ArrayView2<f64>,
    labels: &[bool],
    feature_names: &[String],
    k: usize,
    seed: u64,
) -> Result<(GridSearchResult, TrainedModel), EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let folds = stratified_kfold(labels, k, seed)?;
    let all: Vec<usize> = (0..labels.len()).collect();

    let mut candidates = Vec::with_capacity(grid.len());
    for (ci, params) in grid.iter().enumerate() {
        let mut fold_scores = Vec::with_capacity(k);
        for (fi, fold) in folds.iter().enumerate() {
            let held_out: std::collections::HashSet<usize> = fold.iter().copied().collect();
            let train_idx: Vec<usize> = all.iter().copied().filter(|i| !held_out.contains(i)).collect();
            let (x_tr, y_tr) = subset(features, labels, &train_idx);
            let (x_te, y_te) = subset(features, labels, fold);
            let set = TrainingSet {
                features: x_tr,
                labels: y_tr,
                feature_names: feature_names.to_vec(),
            };
            let fit_seed = derive_seed(seed, "grid-fit", (ci * k + fi) as u64);
            let model = train(&set, params, fit_seed).map_err(|source| EvalError::Training { index: ci, source })?;
            let preds = model
                .classify(x_te.view())
                .map_err(|source| EvalError::Training { index: ci, source })?;
            fold_scores.push(accuracy(&preds, &y_te));
        }
        let mean_score = fold_scores.iter().sum::<f64>() / k as f64;
        candidates.push(GridCandidate {
            params: params.clone(),
            fold_scores,
            mean_score,
        });
    }

    let mut best_index = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.mean_score > candidates[best_index].mean_score {
            best_index = i;
        }
    }
    let best_params = candidates[best_index].params.clone();
    let best_score = candidates[best_index].mean_score;

    let full = TrainingSet {
        features: features.to_owned(),
        labels: labels.to_vec(),
        feature_names: feature_names.to_vec(),
    };
    let refit_seed = derive_seed(seed, "grid-refit", best_index as u64);
    let model = train(&full, &best_params, refit_seed).map_err(|source| EvalError::Training {
        index: best_index,
        source,
    })?;

    Ok((
        GridSearchResult {
            candidates,
            best_index,
            best_params,
            best_score,
            k,
        },
        model,
    ))
}
