//! Evaluation machinery: stratified splitting, cross-validated grid search,
//! classification metrics, correlations, and feature-importance analyses.

pub mod correlation;
pub mod counterfactual;
pub mod grid;
pub mod importance;
pub mod metrics;
pub mod split;

pub use correlation::pearson_matrix;
pub use counterfactual::counterfactual_effect;
pub use grid::{grid_search, GridCandidate, GridSearchResult};
pub use importance::{
    impurity_importance, permutation_importance, subgroup_importance, Bin, ImportanceEntry,
    ImportanceTable, SubgroupImportance,
};
pub use metrics::{compute_metrics, ConfusionMatrix, MetricSet};
pub use split::{stratified_kfold, stratified_split, SplitPlan};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {class} has only {count} members, need at least {need}")]
    DegenerateClass { class: bool, count: usize, need: usize },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("predicted and actual lengths differ: {predicted} vs {actual}")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("grid is empty")]
    EmptyGrid,
    #[error("training failed at grid point {index}: {source}")]
    Training {
        index: usize,
        #[source]
        source: crate::models::ModelError,
    },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error("feature index {index} out of range for {width} features")]
    FeatureOutOfRange { index: usize, width: usize },
    #[error("every grouping bin is empty")]
    EmptyBin,
    #[error("no rows are classified high-risk at the model threshold")]
    NoHighRiskRows,
}
