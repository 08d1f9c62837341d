//! Feature importance: model-agnostic permutation importance (primary
//! mechanism, comparable across all four model kinds), impurity importance
//! for tree ensembles, and per-subgroup permutation importance.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::accuracy;
use super::EvalError;
use crate::models::tree::Node;
use crate::models::{FittedParams, TrainedModel};
use crate::seed::rng_for;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    /// Mean accuracy drop, clipped at 0 for reporting.
    pub importance: f64,
    /// Unclipped mean accuracy drop.
    pub raw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceTable {
    pub fn get(&self, feature: &str) -> Option<&ImportanceEntry> {
        self.entries.iter().find(|e| e.feature == feature)
    }
}

fn sorted_table(mut entries: Vec<ImportanceEntry>) -> ImportanceTable {
    entries.sort_by(|a, b| b.importance.partial_cmp(&a.importance).unwrap().then(a.feature.cmp(&b.feature)));
    ImportanceTable { entries }
}

fn permute_column(
    features: ArrayView2<f64>,
    column: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Array2<f64> {
    let mut out = features.to_owned();
    let mut values: Vec<f64> = features.column(column).to_vec();
    values.shuffle(rng);
    for (i, v) in values.into_iter().enumerate() {
        out[[i, column]] = v;
    }
    out
}

/// importance(f) = mean over repeats of (baseline accuracy - accuracy with
/// column f permuted).
pub fn permutation_importance(
    model: &TrainedModel,
    features: ArrayView2<f64>,
    labels: &[bool],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceTable, EvalError> {
    if features.nrows() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predicted: features.nrows(),
            actual: labels.len(),
        });
    }
    let baseline = accuracy(&model.classify(features)?, labels);
    let mut entries = Vec::with_capacity(model.feature_names.len());
    for (f, name) in model.feature_names.iter().enumerate() {
        let mut drop_sum = 0.0;
        for r in 0..repeats {
            let mut rng = rng_for(seed, "perm", (f * repeats + r) as u64);
            let permuted = permute_column(features, f, &mut rng);
            let acc = accuracy(&model.classify(permuted.view())?, labels);
            drop_sum += baseline - acc;
        }
        let raw = drop_sum / repeats as f64;
        entries.push(ImportanceEntry {
            feature: name.clone(),
            importance: raw.max(0.0),
            raw,
        });
    }
    Ok(sorted_table(entries))
}

/// Total split gain per feature over all trees, normalized to sum 1.
/// Only defined for the tree ensembles; other kinds return `None`.
pub fn impurity_importance(model: &TrainedModel) -> Option<ImportanceTable> {
    let trees = match &model.params {
        FittedParams::RandomForest(rf) => &rf.trees,
        FittedParams::GradientBoost(gb) => &gb.trees,
        _ => return None,
    };
    let mut gains = vec![0.0; model.feature_names.len()];
    for tree in trees {
        for node in &tree.nodes {
            if let Node::Split { feature, gain, .. } = node {
                gains[*feature] += gain;
            }
        }
    }
    let total: f64 = gains.iter().sum();
    let entries = model
        .feature_names
        .iter()
        .zip(&gains)
        .map(|(name, &g)| {
            let v = if total > 0.0 { g / total } else { 0.0 };
            ImportanceEntry {
                feature: name.clone(),
                importance: v,
                raw: v,
            }
        })
        .collect();
    Some(sorted_table(entries))
}

/// Half-open value range [lo, hi) used to group rows for subgroup analysis.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Bin {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
}

impl Bin {
    pub fn new(label: impl Into<String>, lo: f64, hi: f64) -> Bin {
        Bin { label: label.into(), lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v < self.hi
    }
}

pub const MIN_RELIABLE_BIN: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgroupImportance {
    pub bin: String,
    pub n_rows: usize,
    pub importance: f64,
    pub raw: f64,
    /// Bins under MIN_RELIABLE_BIN rows are reported but flagged.
    pub reliable: bool,
}

/// Permutation importance of `target_feature` computed separately within
/// each bin of `grouping_feature`.
#[allow(clippy::too_many_arguments)]
pub fn subgroup_importance(
    model: &TrainedModel,
    features: ArrayView2<f64>,
    labels: &[bool],
    target_feature: usize,
    grouping_feature: usize,
    bins: &[Bin],
    repeats: usize,
    seed: u64,
) -> Result<Vec<SubgroupImportance>, EvalError> {
    let width = model.feature_names.len();
    for idx in [target_feature, grouping_feature] {
        if idx >= width {
            return Err(EvalError::FeatureOutOfRange { index: idx, width });
        }
    }
    let mut out = Vec::with_capacity(bins.len());
    let mut any_nonempty = false;
    for (bi, bin) in bins.iter().enumerate() {
        let rows: Vec<usize> = (0..features.nrows())
            .filter(|&i| bin.contains(features[[i, grouping_feature]]))
            .collect();
        if rows.is_empty() {
            out.push(SubgroupImportance {
                bin: bin.label.clone(),
                n_rows: 0,
                importance: 0.0,
                raw: 0.0,
                reliable: false,
            });
            continue;
        }
        any_nonempty = true;
        let mut sub = Array2::zeros((rows.len(), features.ncols()));
        let mut sub_labels = Vec::with_capacity(rows.len());
        for (r, &i) in rows.iter().enumerate() {
            sub.row_mut(r).assign(&features.row(i));
            sub_labels.push(labels[i]);
        }
        let baseline = accuracy(&model.classify(sub.view())?, &sub_labels);
        let mut drop_sum = 0.0;
        for r in 0..repeats {
            let mut rng = rng_for(seed, "subgroup-perm", (bi * repeats + r) as u64);
            let permuted = permute_column(sub.view(), target_feature, &mut rng);
            drop_sum += baseline - accuracy(&model.classify(permuted.view())?, &sub_labels);
        }
        let raw = drop_sum / repeats as f64;
        out.push(SubgroupImportance {
            bin: bin.label.clone(),
            n_rows: rows.len(),
            importance: raw.max(0.0),
            raw,
            reliable: rows.len() >= MIN_RELIABLE_BIN,
        });
    }
    if !any_nonempty {
        return Err(EvalError::EmptyBin);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train, HyperParams, LogRegParams};
    use crate::models::TrainingSet;
    use ndarray::Array2;
    use rand::Rng;

    fn single_signal_model(n: usize) -> (TrainedModel, Array2<f64>, Vec<bool>) {
        let mut rng = rng_for(17, "imp-toy", 0);
        let mut data = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen_range(-2.0..2.0);
            data.extend([x, rng.gen_range(-2.0..2.0)]);
            labels.push(x > 0.0);
        }
        let features = Array2::from_shape_vec((n, 2), data).unwrap();
        let set = TrainingSet {
            features: features.clone(),
            labels: labels.clone(),
            feature_names: vec!["signal".into(), "noise".into()],
        };
        let model = train(&set, &HyperParams::LogReg(LogRegParams { c: 100.0, ..Default::default() }), 1).unwrap();
        (model, features, labels)
    }

    #[test]
    fn permuting_the_signal_drops_accuracy_to_chance() {
        let (model, x, y) = single_signal_model(400);
        let table = permutation_importance(&model, x.view(), &y, 20, 5).unwrap();
        let signal = table.get("signal").unwrap();
        // baseline ~1.0, permuted ~0.5
        assert!(signal.importance > 0.35, "signal importance {}", signal.importance);
        assert_eq!(table.entries[0].feature, "signal");
    }

    #[test]
    fn unused_feature_importance_converges_to_zero() {
        // L1 with strong regularization zeroes the noise weight exactly,
        // so permuting that column cannot move predictions
        let (model, x, y) = {
            let mut rng = rng_for(23, "imp-l1", 0);
            let n = 300;
            let mut data = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..n {
                let s: f64 = rng.gen_range(-2.0..2.0);
                data.extend([s, rng.gen_range(-2.0..2.0)]);
                labels.push(s > 0.0);
            }
            let features = Array2::from_shape_vec((n, 2), data).unwrap();
            let set = TrainingSet {
                features: features.clone(),
                labels: labels.clone(),
                feature_names: vec!["signal".into(), "noise".into()],
            };
            let hp = HyperParams::LogReg(LogRegParams {
                penalty: crate::models::Penalty::L1,
                c: 0.02,
                ..Default::default()
            });
            (train(&set, &hp, 1).unwrap(), features, labels)
        };
        let crate::models::FittedParams::LogReg(m) = &model.params else { unreachable!() };
        assert_eq!(m.weights[1], 0.0, "precondition: noise weight must be exactly zero");
        let table = permutation_importance(&model, x.view(), &y, 50, 5).unwrap();
        let noise = table.get("noise").unwrap();
        assert!(noise.raw.abs() <= 0.02, "raw importance {}", noise.raw);
    }

    #[test]
    fn constant_grouping_equals_global_importance() {
        let (model, x, y) = single_signal_model(200);
        let bins = [Bin::new("all", f64::NEG_INFINITY, f64::INFINITY)];
        // group on the signal column itself with one all-covering bin
        let sub = subgroup_importance(&model, x.view(), &y, 0, 1, &bins, 20, 5).unwrap();
        assert_eq!(sub.len(), 1);
        assert_eq!(sub[0].n_rows, 200);
        assert!(sub[0].reliable);
        let global = permutation_importance(&model, x.view(), &y, 20, 5).unwrap();
        let g = global.get("signal").unwrap();
        // same mechanism, same rows; only the rng stream differs
        assert!((sub[0].raw - g.raw).abs() < 0.05);
    }

    #[test]
    fn tiny_bins_are_flagged_unreliable() {
        let (model, x, y) = single_signal_model(40);
        let bins = [Bin::new("low", -10.0, -1.9), Bin::new("high", -1.9, 10.0)];
        let sub = subgroup_importance(&model, x.view(), &y, 0, 1, &bins, 5, 5).unwrap();
        assert_eq!(sub.len(), 2);
        let small = sub.iter().find(|s| s.n_rows < MIN_RELIABLE_BIN);
        if let Some(s) = small {
            assert!(!s.reliable);
        }
    }

    #[test]
    fn all_empty_bins_is_an_error() {
        let (model, x, y) = single_signal_model(40);
        let bins = [Bin::new("nowhere", 100.0, 200.0)];
        assert!(matches!(
            subgroup_importance(&model, x.view(), &y, 0, 1, &bins, 5, 5),
            Err(EvalError::EmptyBin)
        ));
    }

    #[test]
    fn impurity_importance_only_for_tree_models() {
        let (model, _, _) = single_signal_model(40);
        assert!(impurity_importance(&model).is_none());
    }
}
