//! Preventive-care return on investment for each model's flagged population.
//!
//! Savings accrue on true positives only, at the expected value
//! risk_reduction x average hospitalization cost each; every flagged patient
//! incurs the five-year preventive cost. Algebraically
//! roi = precision * (risk_reduction * hosp_cost / preventive_cost) - 1.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{compute_metrics, ConfusionMatrix, EvalError, MetricSet};
use crate::models::{ModelKind, TrainedModel};

#[derive(Debug, Error)]
pub enum RoiError {
    #[error("preventive cost must be positive")]
    ZeroCost,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CostAssumptions {
    pub preventive_cost_5yr: f64,
    pub avg_hospitalization_cost: f64,
    pub risk_reduction: f64,
}

impl Default for CostAssumptions {
    fn default() -> Self {
        CostAssumptions {
            preventive_cost_5yr: 2580.0,
            avg_hospitalization_cost: 10924.0,
            risk_reduction: 0.377,
        }
    }
}

impl CostAssumptions {
    pub fn validate(&self) -> Result<(), String> {
        if self.preventive_cost_5yr <= 0.0 || self.avg_hospitalization_cost <= 0.0 {
            return Err("costs must be positive".into());
        }
        if !(self.risk_reduction > 0.0 && self.risk_reduction < 1.0) {
            return Err("risk_reduction must lie in (0,1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoiReport {
    pub model: ModelKind,
    pub n_flagged: usize,
    pub n_true_positive: usize,
    pub predicted_savings: f64,
    pub preventive_cost_total: f64,
    /// Absent (never a sentinel) when nothing was flagged.
    pub roi: Option<f64>,
}

/// (predicted savings - preventive cost) / preventive cost.
pub fn roi_formula(predicted_savings: f64, preventive_cost: f64) -> Result<f64, RoiError> {
    if preventive_cost <= 0.0 {
        return Err(RoiError::ZeroCost);
    }
    Ok((predicted_savings - preventive_cost) / preventive_cost)
}

impl RoiReport {
    /// ROI from flag counts alone; this is what a stored confusion matrix
    /// carries, so reports can be re-costed without retraining.
    pub fn from_counts(
        model: ModelKind,
        n_flagged: usize,
        n_true_positive: usize,
        costs: &CostAssumptions,
    ) -> RoiReport {
        assert!(n_true_positive <= n_flagged);
        let predicted_savings = n_true_positive as f64 * costs.risk_reduction * costs.avg_hospitalization_cost;
        let preventive_cost_total = n_flagged as f64 * costs.preventive_cost_5yr;
        let roi = if n_flagged == 0 {
            None
        } else {
            Some(roi_formula(predicted_savings, preventive_cost_total).expect("positive cost"))
        };
        RoiReport {
            model,
            n_flagged,
            n_true_positive,
            predicted_savings,
            preventive_cost_total,
            roi,
        }
    }

    pub fn from_confusion(model: ModelKind, cm: &ConfusionMatrix, costs: &CostAssumptions) -> RoiReport {
        RoiReport::from_counts(model, cm.tp + cm.fp, cm.tp, costs)
    }
}

/// ROI over the rows a trained model flags positive.
pub fn cohort_roi(
    model: &TrainedModel,
    features: ArrayView2<f64>,
    labels: &[bool],
    costs: &CostAssumptions,
) -> Result<RoiReport, RoiError> {
    let flags = model.classify(features).map_err(EvalError::from)?;
    let n_flagged = flags.iter().filter(|&&f| f).count();
    let n_tp = flags.iter().zip(labels).filter(|(&f, &y)| f && y).count();
    Ok(RoiReport::from_counts(model.kind, n_flagged, n_tp, costs))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub roi: Option<f64>,
    /// n_false_negative x risk_reduction x hospitalization cost: savings
    /// forgone by not flagging actual positives.
    pub missed_savings: f64,
}

/// Recomputes flags, metrics, and ROI across a threshold sweep.
pub fn roi_sensitivity(
    model: &TrainedModel,
    features: ArrayView2<f64>,
    labels: &[bool],
    costs: &CostAssumptions,
    thresholds: &[f64],
) -> Result<Vec<SensitivityPoint>, RoiError> {
    let probs = model.predict_proba(features).map_err(EvalError::from)?;
    let mut out = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let flags: Vec<bool> = probs.iter().map(|&p| p >= t).collect();
        let (cm, metrics) = compute_metrics(&flags, labels)?;
        let report = RoiReport::from_confusion(model.kind, &cm, costs);
        let missed_savings = cm.fn_ as f64 * costs.risk_reduction * costs.avg_hospitalization_cost;
        out.push(SensitivityPoint {
            threshold: t,
            confusion: cm,
            metrics,
            roi: report.roi,
            missed_savings,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_edge_values() {
        assert_eq!(roi_formula(2580.0, 2580.0).unwrap(), 0.0);
        assert_eq!(roi_formula(0.0, 2580.0).unwrap(), -1.0);
        let r = roi_formula(0.377 * 10924.0, 2580.0).unwrap();
        assert!((r - 0.5963).abs() < 5e-4, "roi {r}");
        assert!(matches!(roi_formula(1.0, 0.0), Err(RoiError::ZeroCost)));
    }

    #[test]
    fn precision_drives_roi_via_the_identity() {
        let costs = CostAssumptions::default();
        // precision 0.77: 77 true positives among 100 flagged
        let report = RoiReport::from_counts(ModelKind::LogReg, 100, 77, &costs);
        let roi = report.roi.unwrap();
        assert!((roi - 0.229).abs() < 0.002, "roi {roi}");
        let identity =
            0.77 * (costs.risk_reduction * costs.avg_hospitalization_cost / costs.preventive_cost_5yr) - 1.0;
        assert!((roi - identity).abs() < 1e-12);
    }

    #[test]
    fn perfect_precision_reduces_to_formula_example() {
        let report = RoiReport::from_counts(ModelKind::Mlp, 50, 50, &CostAssumptions::default());
        assert!((report.roi.unwrap() - 0.5963).abs() < 5e-4);
    }

    #[test]
    fn no_flags_is_undefined_not_minus_one() {
        let report = RoiReport::from_counts(ModelKind::LogReg, 0, 0, &CostAssumptions::default());
        assert_eq!(report.roi, None);
        assert_eq!(report.preventive_cost_total, 0.0);
    }

    #[test]
    fn scaling_both_costs_leaves_roi_unchanged() {
        let base = CostAssumptions::default();
        let scaled = CostAssumptions {
            preventive_cost_5yr: base.preventive_cost_5yr * 3.0,
            avg_hospitalization_cost: base.avg_hospitalization_cost * 3.0,
            risk_reduction: base.risk_reduction,
        };
        let a = RoiReport::from_counts(ModelKind::LogReg, 40, 31, &base).roi.unwrap();
        let b = RoiReport::from_counts(ModelKind::LogReg, 40, 31, &scaled).roi.unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn relabeling_non_flagged_rows_does_not_move_roi() {
        use crate::models::{train, HyperParams, LogRegParams, TrainingSet};
        use ndarray::Array2;
        let xs = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let features = Array2::from_shape_vec((6, 1), xs.to_vec()).unwrap();
        let labels: Vec<bool> = xs.iter().map(|&x| x > 0.0).collect();
        let set = TrainingSet {
            features: features.clone(),
            labels: labels.clone(),
            feature_names: vec!["x".into()],
        };
        let model = train(&set, &HyperParams::LogReg(LogRegParams::default()), 1).unwrap();
        let costs = CostAssumptions::default();
        let flags = model.classify(features.view()).unwrap();
        let mut relabeled = labels.clone();
        for (i, &f) in flags.iter().enumerate() {
            if !f {
                relabeled[i] = !relabeled[i];
            }
        }
        let a = cohort_roi(&model, features.view(), &labels, &costs).unwrap();
        let b = cohort_roi(&model, features.view(), &relabeled, &costs).unwrap();
        assert_eq!(a.roi, b.roi);
        assert_eq!(a.n_true_positive, b.n_true_positive);
    }
}
