//! From-scratch classifiers behind one predict-probability contract:
//! logistic regression, gradient boosting, random forest, and a two-hidden-
//! layer perceptron.

pub mod forest;
pub mod gbt;
pub mod logreg;
pub mod mlp;
pub mod standardize;
pub mod tree;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::RfParams;
pub use gbt::GbParams;
pub use logreg::{LogRegParams, Penalty};
pub use mlp::MlpParams;
pub use standardize::Standardizer;
pub use tree::{Tree, TreeParams};

pub const MODEL_ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training diverged to a non-finite loss (bad learning rate?)")]
    NonFinite,
    #[error("feature matrix has {got} columns, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("model artifact io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model artifact parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model artifact version {0}")]
    Version(u32),
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub features: ndarray::Array2<f64>,
    pub labels: Vec<bool>,
    pub feature_names: Vec<String>,
}

impl TrainingSet {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.features.nrows() != self.labels.len() {
            return Err(ModelError::InvalidData(format!(
                "{} feature rows vs {} labels",
                self.features.nrows(),
                self.labels.len()
            )));
        }
        if self.features.ncols() != self.feature_names.len() {
            return Err(ModelError::InvalidData("feature name count mismatch".into()));
        }
        if self.features.nrows() < 2 {
            return Err(ModelError::InvalidData("need at least 2 training rows".into()));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidData("non-finite feature value".into()));
        }
        if self.labels.iter().all(|&l| l) || self.labels.iter().all(|&l| !l) {
            return Err(ModelError::InvalidData("training labels are single-class".into()));
        }
        Ok(())
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect()
    }

    pub fn base_rate(&self) -> f64 {
        self.labels.iter().filter(|&&l| l).count() as f64 / self.labels.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    LogReg,
    GradientBoost,
    RandomForest,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::LogReg,
        ModelKind::GradientBoost,
        ModelKind::RandomForest,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LogReg => "logreg",
            ModelKind::GradientBoost => "gradient_boost",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "logreg" | "lr" => Some(ModelKind::LogReg),
            "gradient_boost" | "gb" => Some(ModelKind::GradientBoost),
            "random_forest" | "rf" => Some(ModelKind::RandomForest),
            "mlp" | "ann" => Some(ModelKind::Mlp),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind")]
pub enum HyperParams {
    LogReg(LogRegParams),
    GradientBoost(GbParams),
    RandomForest(RfParams),
    Mlp(MlpParams),
}

impl HyperParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            HyperParams::LogReg(_) => ModelKind::LogReg,
            HyperParams::GradientBoost(_) => ModelKind::GradientBoost,
            HyperParams::RandomForest(_) => ModelKind::RandomForest,
            HyperParams::Mlp(_) => ModelKind::Mlp,
        }
    }
}

/// Kind-specific fitted state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FittedParams {
    LogReg(logreg::LogRegModel),
    GradientBoost(gbt::GbModel),
    RandomForest(forest::RfModel),
    Mlp(mlp::MlpModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub kind: ModelKind,
    pub hyper_params: HyperParams,
    pub feature_names: Vec<String>,
    pub threshold: f64,
    pub params: FittedParams,
}

impl TrainedModel {
    /// Probability of the positive class for every row of `features`.
    pub fn predict_proba(&self, features: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
        if features.ncols() != self.feature_names.len() {
            return Err(ModelError::ShapeMismatch {
                expected: self.feature_names.len(),
                got: features.ncols(),
            });
        }
        let probs = match &self.params {
            FittedParams::LogReg(m) => m.predict_proba(features),
            FittedParams::GradientBoost(m) => m.predict_proba(features),
            FittedParams::RandomForest(m) => m.predict_proba(features),
            FittedParams::Mlp(m) => m.predict_proba(features),
        };
        debug_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        Ok(probs)
    }

    pub fn classify(&self, features: ArrayView2<f64>) -> Result<Vec<bool>, ModelError> {
        Ok(self
            .predict_proba(features)?
            .into_iter()
            .map(|p| p >= self.threshold)
            .collect())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<TrainedModel, ModelError> {
        let json = std::fs::read_to_string(path)?;
        let model: TrainedModel = serde_json::from_str(&json)?;
        if model.version != MODEL_ARTIFACT_VERSION {
            return Err(ModelError::Version(model.version));
        }
        Ok(model)
    }
}

/// Dispatches to the kind-specific trainer.
pub fn train(data: &TrainingSet, hp: &HyperParams, seed: u64) -> Result<TrainedModel, ModelError> {
    match hp {
        HyperParams::LogReg(p) => logreg::train_logreg(data, p, seed),
        HyperParams::GradientBoost(p) => gbt::train_gradient_boosting(data, p, seed),
        HyperParams::RandomForest(p) => forest::train_random_forest(data, p, seed),
        HyperParams::Mlp(p) => mlp::train_mlp(data, p, seed),
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy with probability clamping.
pub fn log_loss(probs: &[f64], labels: &[f64]) -> f64 {
    const EPS: f64 = 1e-12;
    let n = probs.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(EPS, 1.0 - EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
    }

    #[test]
    fn training_set_rejects_single_class() {
        let set = TrainingSet {
            features: array![[0.0], [1.0]],
            labels: vec![true, true],
            feature_names: vec!["x".into()],
        };
        assert!(set.validate().is_err());
    }

    #[test]
    fn predict_proba_rejects_wrong_width() {
        let set = TrainingSet {
            features: array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [0.2, 0.9]],
            labels: vec![true, false, true, false],
            feature_names: vec!["a".into(), "b".into()],
        };
        let model = train(
            &set,
            &HyperParams::LogReg(LogRegParams::default()),
            1,
        )
        .unwrap();
        let narrow = array![[0.0]];
        assert!(matches!(
            model.predict_proba(narrow.view()),
            Err(ModelError::ShapeMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn save_load_predict_is_bit_identical() {
        let set = TrainingSet {
            features: array![[0.1, 1.0], [0.9, 0.2], [0.4, 0.7], [0.8, 0.1], [0.3, 0.6], [0.7, 0.3]],
            labels: vec![true, false, true, false, true, false],
            feature_names: vec!["a".into(), "b".into()],
        };
        for hp in [
            HyperParams::LogReg(LogRegParams::default()),
            HyperParams::GradientBoost(GbParams { n_trees: 10, ..GbParams::default() }),
            HyperParams::RandomForest(RfParams { n_trees: 5, ..RfParams::default() }),
            HyperParams::Mlp(MlpParams { epochs: 5, ..MlpParams::default() }),
        ] {
            let model = train(&set, &hp, 42).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model.json");
            model.save(&path).unwrap();
            let reloaded = TrainedModel::load(&path).unwrap();
            let before = model.predict_proba(set.features.view()).unwrap();
            let after = reloaded.predict_proba(set.features.view()).unwrap();
            assert_eq!(before, after, "round trip changed predictions for {:?}", hp.kind());
        }
    }
}
