//! End-to-end run: ingest -> cohort -> stratified split -> per-model grid
//! search -> test metrics -> correlations -> importance -> counterfactual ->
//! ROI, with every artifact written under the configured output directory.
//!
//! All randomness is derived from the run seed through named streams, and
//! every stage iterates in a fixed order, so a rerun with the same config
//! reproduces `report.json` byte for byte.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::cohort::{build_feature_matrix, write_cohort_csv, Cohort, CohortError};
use crate::ehr::{load_dataset, IngestError};
use crate::eval::{
    compute_metrics, counterfactual_effect, grid_search, impurity_importance, pearson_matrix,
    permutation_importance, stratified_split, subgroup_importance, EvalError,
};
use crate::models::TrainedModel;
use crate::report::{
    sha256_hex, write_correlations_csv, write_importance_csv, write_roi_sensitivity_csv,
    write_subgroup_csv, CounterfactualReport, EvaluationReport, ModelReport, SubgroupReport,
    REPORT_VERSION,
};
use crate::roi::{roi_sensitivity, RoiError, RoiReport};
use crate::runcfg::{ConfigError, RunConfig};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Roi(#[from] RoiError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn feature_index(names: &[String], name: &str) -> Result<usize, PipelineError> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| ConfigError::Invalid(format!("unknown feature name {name}")).into())
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

struct Evaluated {
    report: ModelReport,
    model: TrainedModel,
}

/// Loads the dataset, builds the cohort, and evaluates every configured
/// model; pure in-memory computation, no files written.
pub fn evaluate(cfg: &RunConfig) -> Result<(EvaluationReport, Cohort, Vec<TrainedModel>), PipelineError> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.data_dir, &cfg.files)?;
    let cohort = build_feature_matrix(&dataset, &cfg.cohort)?;

    let split = stratified_split(&cohort.labels, cfg.test_fraction, derive_seed(cfg.seed, "split", 0))?;
    let (train_x, train_y) = subset(cohort.matrix.view(), &cohort.labels, &split.train_indices);
    let (test_x, test_y) = subset(cohort.matrix.view(), &cohort.labels, &split.test_indices);

    let mut evaluated = Vec::with_capacity(cfg.models.len());
    for (mi, &kind) in cfg.models.iter().enumerate() {
        let grid = cfg.grids.for_kind(kind);
        let model_seed = derive_seed(cfg.seed, kind.name(), mi as u64);
        let (cv, mut model) = grid_search(
            &grid,
            train_x.view(),
            &train_y,
            &cohort.feature_names,
            cfg.cv_folds,
            model_seed,
        )?;
        model.threshold = cfg.threshold;

        let preds = model.classify(test_x.view()).map_err(EvalError::from)?;
        let (confusion, metrics) = compute_metrics(&preds, &test_y)?;
        let roi = RoiReport::from_confusion(kind, &confusion, &cfg.costs);
        let perm = permutation_importance(
            &model,
            test_x.view(),
            &test_y,
            cfg.importance_repeats,
            derive_seed(cfg.seed, "importance", mi as u64),
        )?;
        let impurity = impurity_importance(&model);
        let sensitivity = roi_sensitivity(&model, test_x.view(), &test_y, &cfg.costs, &cfg.sensitivity_thresholds)?;
        evaluated.push(Evaluated {
            report: ModelReport {
                model: kind,
                best_params: cv.best_params.clone(),
                cv,
                confusion,
                metrics,
                permutation_importance: perm,
                impurity_importance: impurity,
                roi,
                sensitivity,
            },
            model,
        });
    }

    let (corr, correlation_warnings) = pearson_matrix(cohort.matrix.view());
    let correlations: Vec<Vec<f64>> = (0..corr.nrows()).map(|i| corr.row(i).to_vec()).collect();

    let subgroup = match evaluated.iter().find(|e| e.report.model == cfg.subgroup.model) {
        None => None,
        Some(e) => {
            let target = feature_index(&cohort.feature_names, &cfg.subgroup.target_feature)?;
            let grouping = feature_index(&cohort.feature_names, &cfg.subgroup.grouping_feature)?;
            let bins = subgroup_importance(
                &e.model,
                test_x.view(),
                &test_y,
                target,
                grouping,
                &cfg.subgroup.bins,
                cfg.importance_repeats,
                derive_seed(cfg.seed, "subgroup", 0),
            )?;
            Some(SubgroupReport {
                model: cfg.subgroup.model,
                target_feature: cfg.subgroup.target_feature.clone(),
                grouping_feature: cfg.subgroup.grouping_feature.clone(),
                bins,
            })
        }
    };

    let counterfactual = match evaluated.iter().find(|e| e.report.model == cfg.counterfactual.model) {
        None => None,
        Some(e) => {
            let feature = feature_index(&cohort.feature_names, &cfg.counterfactual.feature)?;
            let flags = e.model.classify(test_x.view()).map_err(EvalError::from)?;
            let n_high_risk = flags.iter().filter(|&&f| f).count();
            let risk_reduction = match counterfactual_effect(
                &e.model,
                test_x.view(),
                feature,
                cfg.counterfactual.baseline_value,
                cfg.counterfactual.treated_value,
            ) {
                Ok(r) => Some(r),
                Err(EvalError::NoHighRiskRows) => None,
                Err(e) => return Err(e.into()),
            };
            Some(CounterfactualReport {
                model: cfg.counterfactual.model,
                feature: cfg.counterfactual.feature.clone(),
                baseline_value: cfg.counterfactual.baseline_value,
                treated_value: cfg.counterfactual.treated_value,
                risk_reduction,
                n_high_risk,
            })
        }
    };

    let n_pos = cohort.labels.iter().filter(|&&y| y).count();
    let report = EvaluationReport {
        version: REPORT_VERSION,
        seed: cfg.seed,
        config_sha256: sha256_hex(cfg.provenance_json().as_bytes()),
        n_patients: cohort.rows.len(),
        n_train: split.train_indices.len(),
        n_test: split.test_indices.len(),
        base_rate: n_pos as f64 / cohort.labels.len() as f64,
        feature_names: cohort.feature_names.clone(),
        correlations,
        correlation_warnings,
        models: evaluated.iter().map(|e| e.report.clone()).collect(),
        subgroup,
        counterfactual,
    };
    let models = evaluated.into_iter().map(|e| e.model).collect();
    Ok((report, cohort, models))
}

/// Full `run` command: evaluate and write `report.json`, `cohort.csv`, and
/// the plot-data CSVs under the output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<EvaluationReport, PipelineError> {
    let (report, cohort, _) = evaluate(cfg)?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out)?;
    report.save(&out.join("report.json"))?;
    write_cohort_csv(&cohort, &out.join("cohort.csv"))?;
    write_correlations_csv(&out.join("correlations.csv"), &report.feature_names, &report.correlations)?;
    write_importance_csv(&out.join("importance.csv"), &report.models)?;
    if let Some(sub) = &report.subgroup {
        write_subgroup_csv(&out.join("subgroup_importance.csv"), sub)?;
    }
    write_roi_sensitivity_csv(&out.join("roi_sensitivity.csv"), &report.models)?;
    Ok(report)
}

/// `roi` command core: recompute every model's ROI from the stored confusion
/// matrices under new cost assumptions, without retraining.
pub fn recost_report(report: &EvaluationReport, costs: &crate::roi::CostAssumptions) -> Vec<RoiReport> {
    report
        .models
        .iter()
        .map(|m| RoiReport::from_confusion(m.model, &m.confusion, costs))
        .collect()
}

/// `ingest-check` command core: load and cross-validate the dataset, then
/// summarize table counts and warnings.
pub fn ingest_summary(data_dir: &Path, files: &crate::ehr::FileMap) -> Result<String, PipelineError> {
    let dataset = load_dataset(data_dir, files)?;
    let counts = dataset.table_counts();
    let mut names: Vec<&String> = counts.keys().collect();
    names.sort();
    let mut out = String::new();
    for name in names {
        out.push_str(&format!("{name}: {} records\n", counts[name]));
    }
    for w in &dataset.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    Ok(out)
}
