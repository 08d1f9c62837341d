//! Gradient boosting on logistic loss. Stagewise additive model: start from
//! the base-rate log-odds, fit each regression tree to the residuals y - p,
//! set leaf values by a Newton step, and shrink by the learning rate.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::tree::{train_tree, Criterion, Node, Tree, TreeParams};
use super::{log_loss, sigmoid, FittedParams, ModelError, ModelKind, TrainedModel, TrainingSet};
use crate::seed::rng_for;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GbParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_trees: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbParams {
    fn default() -> Self {
        GbParams {
            learning_rate: 0.01,
            max_depth: 3,
            n_trees: 200,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbModel {
    /// Base-rate log-odds.
    pub init_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Training log-loss after each stage (index 0 is the base rate alone).
    pub train_logloss: Vec<f64>,
}

impl GbModel {
    pub fn decision_scores(&self, features: ArrayView2<f64>) -> Vec<f64> {
        let mut scores = vec![self.init_score; features.nrows()];
        for tree in &self.trees {
            for (s, v) in scores.iter_mut().zip(tree.predict(features)) {
                *s += self.learning_rate * v;
            }
        }
        scores
    }

    pub fn predict_proba(&self, features: ArrayView2<f64>) -> Vec<f64> {
        self.decision_scores(features).into_iter().map(sigmoid).collect()
    }
}

pub fn train_gradient_boosting(data: &TrainingSet, hp: &GbParams, seed: u64) -> Result<TrainedModel, ModelError> {
    data.validate()?;
    if hp.learning_rate < 0.0 || hp.max_depth == 0 {
        return Err(ModelError::InvalidData("learning_rate must be >= 0, max_depth >= 1".into()));
    }
    let y = data.labels_f64();
    let n = y.len();
    let p0 = data.base_rate().clamp(1e-12, 1.0 - 1e-12);
    let init_score = (p0 / (1.0 - p0)).ln();

    let mut scores = vec![init_score; n];
    let mut probs: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
    let mut train_logloss = vec![log_loss(&probs, &y)];
    let tree_params = TreeParams {
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        features_per_split: None,
    };

    let mut trees = Vec::with_capacity(hp.n_trees);
    for stage in 0..hp.n_trees {
        let residuals: Vec<f64> = y.iter().zip(&probs).map(|(&yi, &pi)| yi - pi).collect();
        let mut rng = rng_for(seed, "gb-stage", stage as u64);
        let mut tree = train_tree(
            data.features.view(),
            &residuals,
            tree_params,
            Criterion::Variance,
            &mut rng,
            None,
        );

        // Newton leaf values: sum(residual) / sum(p(1-p)) over leaf samples
        let mut num: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
        let mut den: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
        let mut leaf_of = Vec::with_capacity(n);
        for i in 0..n {
            let leaf = tree.leaf_index(data.features.row(i));
            *num.entry(leaf).or_insert(0.0) += residuals[i];
            *den.entry(leaf).or_insert(0.0) += probs[i] * (1.0 - probs[i]);
            leaf_of.push(leaf);
        }
        let leaves: Vec<usize> = tree
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, node)| matches!(node, Node::Leaf { .. }))
            .map(|(i, _)| i)
            .collect();
        for leaf in leaves {
            let value = match (num.get(&leaf), den.get(&leaf)) {
                (Some(&nu), Some(&de)) if de > 1e-12 => nu / de,
                _ => 0.0, // no training sample landed here (possible off-sample leaf)
            };
            tree.set_leaf_value(leaf, value);
        }

        for i in 0..n {
            let Node::Leaf { value } = tree.nodes[leaf_of[i]] else { unreachable!() };
            scores[i] += hp.learning_rate * value;
            probs[i] = sigmoid(scores[i]);
        }
        let loss = log_loss(&probs, &y);
        if !loss.is_finite() {
            return Err(ModelError::NonFinite);
        }
        train_logloss.push(loss);
        trees.push(tree);
    }

    Ok(TrainedModel {
        version: super::MODEL_ARTIFACT_VERSION,
        kind: ModelKind::GradientBoost,
        hyper_params: super::HyperParams::GradientBoost(hp.clone()),
        feature_names: data.feature_names.clone(),
        threshold: 0.5,
        params: FittedParams::GradientBoost(GbModel {
            init_score,
            learning_rate: hp.learning_rate,
            trees,
            train_logloss,
        }),
    })
}
