//! Random forest: bootstrap resamples, random feature subsets per split,
//! prediction by averaging per-tree class probabilities.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{train_tree, Criterion, Tree, TreeParams};
use super::{FittedParams, ModelError, ModelKind, TrainedModel, TrainingSet};
use crate::seed::rng_for;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means ceil(sqrt(D)).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            max_depth: 10,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<Tree>,
}

impl RfModel {
    pub fn predict_proba(&self, features: ArrayView2<f64>) -> Vec<f64> {
        let mut sums = vec![0.0; features.nrows()];
        for tree in &self.trees {
            for (s, p) in sums.iter_mut().zip(tree.predict(features)) {
                *s += p;
            }
        }
        let n = self.trees.len() as f64;
        sums.into_iter().map(|s| s / n).collect()
    }
}

pub fn train_random_forest(data: &TrainingSet, hp: &RfParams, seed: u64) -> Result<TrainedModel, ModelError> {
    data.validate()?;
    if hp.n_trees == 0 || hp.max_depth == 0 {
        return Err(ModelError::InvalidData("n_trees and max_depth must be positive".into()));
    }
    let n = data.features.nrows();
    let d = data.features.ncols();
    let y = data.labels_f64();
    let features_per_split = hp.features_per_split.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
    let tree_params = TreeParams {
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        features_per_split: Some(features_per_split.min(d)),
    };

    let mut trees = Vec::with_capacity(hp.n_trees);
    for t in 0..hp.n_trees {
        // per-tree rng derived from (seed, index): results do not depend on
        // the order trees are trained in
        let mut rng = rng_for(seed, "rf-tree", t as u64);
        let (x_t, y_t) = if hp.bootstrap {
            let mut xb = Array2::zeros((n, d));
            let mut yb = vec![0.0; n];
            for (i, yi) in yb.iter_mut().enumerate() {
                let pick = rng.gen_range(0..n);
                xb.row_mut(i).assign(&data.features.row(pick));
                *yi = y[pick];
            }
            (xb, yb)
        } else {
            (data.features.clone(), y.clone())
        };
        trees.push(train_tree(x_t.view(), &y_t, tree_params, Criterion::Gini, &mut rng, None));
    }

    Ok(TrainedModel {
        version: super::MODEL_ARTIFACT_VERSION,
        kind: ModelKind::RandomForest,
        hyper_params: super::HyperParams::RandomForest(hp.clone()),
        feature_names: data.feature_names.clone(),
        threshold: 0.5,
        params: FittedParams::RandomForest(RfModel { trees }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::train_tree;
    use ndarray::Array2;

    fn toy() -> TrainingSet {
        let xs = [0.1, 0.4, 0.9, 1.5, 2.1, 2.8, 3.4, 4.0];
        TrainingSet {
            features: Array2::from_shape_vec((8, 2), xs.iter().flat_map(|&x| [x, 1.0 - x]).collect()).unwrap(),
            labels: xs.iter().map(|&x| x > 2.0).collect(),
            feature_names: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let set = toy();
        let hp = RfParams {
            n_trees: 1,
            bootstrap: false,
            features_per_split: Some(2),
            max_depth: 4,
            min_samples_leaf: 1,
        };
        let model = train_random_forest(&set, &hp, 9).unwrap();
        let mut rng = rng_for(9, "rf-tree", 0);
        let single = train_tree(
            set.features.view(),
            &set.labels_f64(),
            TreeParams {
                max_depth: 4,
                min_samples_leaf: 1,
                features_per_split: Some(2),
            },
            Criterion::Gini,
            &mut rng,
            None,
        );
        assert_eq!(
            model.predict_proba(set.features.view()).unwrap(),
            single.predict(set.features.view())
        );
    }

    #[test]
    fn same_seed_is_deterministic() {
        let set = toy();
        let hp = RfParams { n_trees: 10, ..Default::default() };
        let a = train_random_forest(&set, &hp, 7).unwrap();
        let b = train_random_forest(&set, &hp, 7).unwrap();
        assert_eq!(
            a.predict_proba(set.features.view()).unwrap(),
            b.predict_proba(set.features.view()).unwrap()
        );
    }

    #[test]
    fn forest_probability_is_mean_of_tree_leaves() {
        let set = toy();
        let hp = RfParams { n_trees: 2, ..Default::default() };
        let model = train_random_forest(&set, &hp, 3).unwrap();
        let FittedParams::RandomForest(rf) = &model.params else { unreachable!() };
        let probs = model.predict_proba(set.features.view()).unwrap();
        for (i, p) in probs.iter().enumerate() {
            let hand = (rf.trees[0].predict_row(set.features.row(i))
                + rf.trees[1].predict_row(set.features.row(i)))
                / 2.0;
            assert_eq!(*p, hand);
        }
    }
}
