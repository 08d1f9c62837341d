//! Counterfactual risk reduction: among rows the model classifies high-risk
//! at their observed values, compare mean predicted risk with one feature
//! forced to a treated value versus forced to a baseline value.

use ndarray::ArrayView2;

use super::EvalError;
use crate::models::TrainedModel;

fn forced(features: ArrayView2<f64>, rows: &[usize], feature: usize, value: f64) -> ndarray::Array2<f64> {
    let mut out = ndarray::Array2::zeros((rows.len(), features.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&features.row(i));
        out[[r, feature]] = value;
    }
    out
}

/// Returns 1 - (treated mean risk / baseline mean risk) over high-risk rows.
pub fn counterfactual_effect(
    model: &TrainedModel,
    features: ArrayView2<f64>,
    feature: usize,
    baseline_value: f64,
    treated_value: f64,
) -> Result<f64, EvalError> {
    if feature >= model.feature_names.len() {
        return Err(EvalError::FeatureOutOfRange {
            index: feature,
            width: model.feature_names.len(),
        });
    }
    let flags = model.classify(features)?;
    let high_risk: Vec<usize> = flags
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| f.then_some(i))
        .collect();
    if high_risk.is_empty() {
        return Err(EvalError::NoHighRiskRows);
    }

    let base = forced(features, &high_risk, feature, baseline_value);
    let treat = forced(features, &high_risk, feature, treated_value);
    let mean = |probs: Vec<f64>| probs.iter().sum::<f64>() / probs.len() as f64;
    let base_mean = mean(model.predict_proba(base.view())?);
    let treat_mean = mean(model.predict_proba(treat.view())?);
    Ok(1.0 - treat_mean / base_mean)
}
