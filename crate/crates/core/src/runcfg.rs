//! Run configuration: a single JSON document that pins every knob of a
//! pipeline run, with command-line overrides layered on top
//! (flag > config file > default).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::CohortConfig;
use crate::ehr::FileMap;
use crate::eval::Bin;
use crate::models::{GbParams, HyperParams, LogRegParams, MlpParams, ModelKind, Penalty, RfParams};
use crate::roi::CostAssumptions;
use crate::synthgen::GeneratorConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Grids {
    pub logreg: Vec<LogRegParams>,
    pub gradient_boost: Vec<GbParams>,
    pub random_forest: Vec<RfParams>,
    pub mlp: Vec<MlpParams>,
}

impl Default for Grids {
    fn default() -> Self {
        let logreg = [0.1, 1.0, 10.0]
            .into_iter()
            .map(|c| LogRegParams { c, ..Default::default() })
            .chain(std::iter::once(LogRegParams {
                penalty: Penalty::L1,
                c: 1.0,
                ..Default::default()
            }))
            .collect();
        let mut gradient_boost = Vec::new();
        for learning_rate in [0.05, 0.1] {
            for max_depth in [2, 3] {
                gradient_boost.push(GbParams {
                    learning_rate,
                    max_depth,
                    n_trees: 120,
                    ..Default::default()
                });
            }
        }
        let mut random_forest = Vec::new();
        for max_depth in [5, 10] {
            for min_samples_leaf in [1, 4] {
                random_forest.push(RfParams {
                    n_trees: 60,
                    max_depth,
                    min_samples_leaf,
                    ..Default::default()
                });
            }
        }
        let mlp = vec![MlpParams {
            units_1: 32,
            units_2: 16,
            epochs: 60,
            ..Default::default()
        }];
        Grids {
            logreg,
            gradient_boost,
            random_forest,
            mlp,
        }
    }
}

impl Grids {
    pub fn for_kind(&self, kind: ModelKind) -> Vec<HyperParams> {
        match kind {
            ModelKind::LogReg => self.logreg.iter().cloned().map(HyperParams::LogReg).collect(),
            ModelKind::GradientBoost => self
                .gradient_boost
                .iter()
                .cloned()
                .map(HyperParams::GradientBoost)
                .collect(),
            ModelKind::RandomForest => self
                .random_forest
                .iter()
                .cloned()
                .map(HyperParams::RandomForest)
                .collect(),
            ModelKind::Mlp => self.mlp.iter().cloned().map(HyperParams::Mlp).collect(),
        }
    }
}

/// Counterfactual scenario: force one feature from a baseline to a treated
/// value over the high-risk population.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CounterfactualSpec {
    pub model: ModelKind,
    pub feature: String,
    pub baseline_value: f64,
    pub treated_value: f64,
}

impl Default for CounterfactualSpec {
    fn default() -> Self {
        // a well-specified linear-logistic estimator; tree ensembles shrink
        // probabilities toward the base rate and attenuate relative effects
        CounterfactualSpec {
            model: ModelKind::LogReg,
            feature: "wellness_perc".into(),
            baseline_value: 0.0,
            treated_value: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SubgroupSpec {
    pub model: ModelKind,
    pub target_feature: String,
    pub grouping_feature: String,
    pub bins: Vec<Bin>,
}

impl Default for SubgroupSpec {
    fn default() -> Self {
        SubgroupSpec {
            model: ModelKind::GradientBoost,
            target_feature: "wellness_perc".into(),
            grouping_feature: "acute_conditions".into(),
            // finite bounds: JSON cannot carry infinities
            bins: vec![
                Bin::new("acute 0-1", f64::MIN, 2.0),
                Bin::new("acute 2+", 2.0, f64::MAX),
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub threshold: f64,
    pub test_fraction: f64,
    pub cv_folds: usize,
    pub importance_repeats: usize,
    pub models: Vec<ModelKind>,
    pub cohort: CohortConfig,
    pub costs: CostAssumptions,
    pub files: FileMap,
    pub grids: Grids,
    pub generator: GeneratorConfig,
    pub sensitivity_thresholds: Vec<f64>,
    pub counterfactual: CounterfactualSpec,
    pub subgroup: SubgroupSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            seed: 7,
            threshold: 0.5,
            test_fraction: 0.2,
            cv_folds: 5,
            importance_repeats: 10,
            models: ModelKind::ALL.to_vec(),
            cohort: CohortConfig::default(),
            costs: CostAssumptions::default(),
            files: FileMap::default(),
            grids: Grids::default(),
            generator: GeneratorConfig::default(),
            sensitivity_thresholds: vec![0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7],
            counterfactual: CounterfactualSpec::default(),
            subgroup: SubgroupSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ConfigError::Invalid("threshold must lie in (0,1)".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(ConfigError::Invalid("test_fraction must lie in (0,1)".into()));
        }
        if self.cv_folds < 2 {
            return Err(ConfigError::Invalid("cv_folds must be at least 2".into()));
        }
        if self.importance_repeats == 0 {
            return Err(ConfigError::Invalid("importance_repeats must be positive".into()));
        }
        if self.models.is_empty() {
            return Err(ConfigError::Invalid("at least one model kind required".into()));
        }
        self.cohort.validate().map_err(ConfigError::Invalid)?;
        self.costs.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// Canonical JSON for hashing into report provenance.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    /// Hash input for report provenance: filesystem locations are blanked so
    /// the same run written elsewhere carries the same identity.
    pub fn provenance_json(&self) -> String {
        let mut cfg = self.clone();
        cfg.data_dir = PathBuf::new();
        cfg.output_dir = PathBuf::new();
        cfg.canonical_json()
    }
}

/// Command-line overrides; `None` keeps the config-file (or default) value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub models: Option<Vec<ModelKind>>,
    pub preventive_cost: Option<f64>,
    pub hosp_cost: Option<f64>,
    pub risk_reduction: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), ConfigError> {
        if let Some(d) = &self.data_dir {
            cfg.data_dir = d.clone();
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.generator.seed = s;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(m) = &self.models {
            cfg.models = m.clone();
        }
        if let Some(c) = self.preventive_cost {
            cfg.costs.preventive_cost_5yr = c;
        }
        if let Some(c) = self.hosp_cost {
            cfg.costs.avg_hospitalization_cost = c;
        }
        if let Some(r) = self.risk_reduction {
            cfg.costs.risk_reduction = r;
        }
        cfg.validate()
    }
}
