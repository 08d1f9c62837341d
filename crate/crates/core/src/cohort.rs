//! Cohort construction: eligibility, two fixed 5-year windows anchored at the
//! first encounter, feature engineering, and the inpatient outcome label.
//!
//! Features come only from the observation window (first span), the label
//! only from the outcome window (second span).

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::{add_years, age_years, midnight};
use crate::ehr::{EhrDataset, PatientRecord};

pub const FEATURE_NAMES: [&str; 9] = [
    "age",
    "gender_code",
    "acute_conditions",
    "chronic_conditions",
    "wellness_perc",
    "adherence_rate",
    "low_adherence",
    "expenses",
    "coverage",
];

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("no eligible patients in dataset")]
    EmptyCohort,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CohortConfig {
    pub observation_years: u32,
    pub outcome_years: u32,
    pub min_history_years: u32,
    pub adherence_threshold: f64,
    pub acute_resolution_days: i64,
    pub assumed_days_per_dispense: i64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            observation_years: 5,
            outcome_years: 5,
            min_history_years: 10,
            adherence_threshold: 0.80,
            acute_resolution_days: 90,
            assumed_days_per_dispense: 30,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.observation_years == 0 || self.outcome_years == 0 || self.min_history_years == 0 {
            return Err("window lengths must be positive".into());
        }
        if self.observation_years + self.outcome_years > self.min_history_years {
            return Err("observation + outcome years must not exceed min history years".into());
        }
        if !(0.0..=1.0).contains(&self.adherence_threshold) {
            return Err("adherence threshold must be in [0,1]".into());
        }
        if self.acute_resolution_days <= 0 || self.assumed_days_per_dispense <= 0 {
            return Err("day spans must be positive".into());
        }
        Ok(())
    }
}

/// One eligible patient's engineered features plus the outcome label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortRow {
    pub patient_id: String,
    pub index_date: NaiveDate,
    pub age: i64,
    pub gender_code: f64,
    pub acute_conditions: u32,
    pub chronic_conditions: u32,
    pub wellness_perc: f64,
    pub adherence_rate: Option<f64>,
    pub low_adherence: bool,
    pub expenses: f64,
    pub coverage: f64,
    pub label_inpatient: bool,
}

/// Date of the patient's earliest encounter; `None` when there are none.
pub fn compute_index_date(patient: &PatientRecord, dataset: &EhrDataset) -> Option<NaiveDate> {
    dataset
        .patient_encounters(&patient.id)
        .map(|e| e.start)
        .min()
        .map(|t| t.date_naive())
}

fn last_event_date(patient_id: &str, dataset: &EhrDataset) -> Option<NaiveDate> {
    let enc = dataset
        .patient_encounters(patient_id)
        .flat_map(|e| [Some(e.start.date_naive()), e.stop.map(|s| s.date_naive())])
        .flatten();
    let cond = dataset
        .patient_conditions(patient_id)
        .flat_map(|c| [Some(c.start), c.stop])
        .flatten();
    let med = dataset
        .patient_medications(patient_id)
        .flat_map(|m| [Some(m.start.date_naive()), m.stop.map(|s| s.date_naive())])
        .flatten();
    enc.chain(cond).chain(med).max()
}

/// Keeps patients with at least `min_history_years` of record span after the
/// index date who are not dead before the end of the outcome window.
pub fn filter_eligible(dataset: &EhrDataset, cfg: &CohortConfig) -> Vec<(String, NaiveDate)> {
    let mut eligible = Vec::new();
    for patient in &dataset.patients {
        let Some(index) = compute_index_date(patient, dataset) else {
            continue;
        };
        let Some(last) = last_event_date(&patient.id, dataset) else {
            continue;
        };
        if last < add_years(index, cfg.min_history_years) {
            continue;
        }
        let horizon_end = add_years(index, cfg.observation_years + cfg.outcome_years);
        if patient.death_date.is_some_and(|d| d < horizon_end) {
            continue;
        }
        eligible.push((patient.id.clone(), index));
    }
    eligible.sort_by(|a, b| a.0.cmp(&b.0));
    eligible
}

/// Fraction of observation-window years covered by wellness visits, capped at 1.
pub fn compute_wellness_perc(
    patient_id: &str,
    index_date: NaiveDate,
    dataset: &EhrDataset,
    cfg: &CohortConfig,
) -> f64 {
    let window_start = midnight(index_date);
    let window_end = midnight(add_years(index_date, cfg.observation_years));
    let count = dataset
        .patient_encounters(patient_id)
        .filter(|e| e.encounter_class == "wellness" && e.start >= window_start && e.start < window_end)
        .count();
    (count as f64 / f64::from(cfg.observation_years)).min(1.0)
}

/// Refill adherence over observation-window medications. Returns the rate
/// (absent when there are no medications in the window) and the low-adherence
/// flag; patients with no prescriptions are never flagged low.
pub fn compute_adherence(
    patient_id: &str,
    index_date: NaiveDate,
    dataset: &EhrDataset,
    cfg: &CohortConfig,
) -> (Option<f64>, bool) {
    let window_start = midnight(index_date);
    let window_end = midnight(add_years(index_date, cfg.observation_years));
    let mut total_dispenses = 0u64;
    let mut total_expected = 0u64;
    for med in dataset.patient_medications(patient_id) {
        if med.start < window_start || med.start >= window_end {
            continue;
        }
        let stop = med.stop.unwrap_or(window_end);
        let duration_days = (stop - med.start).num_days().max(0);
        let expected = ((duration_days + cfg.assumed_days_per_dispense - 1) / cfg.assumed_days_per_dispense).max(1);
        total_dispenses += u64::from(med.dispenses);
        total_expected += expected as u64;
    }
    if total_expected == 0 {
        return (None, false);
    }
    let rate = (total_dispenses as f64 / total_expected as f64).min(1.0);
    (Some(rate), rate < cfg.adherence_threshold)
}

/// Counts observation-window conditions: resolved within
/// `acute_resolution_days` counts acute, otherwise chronic.
pub fn classify_conditions(
    patient_id: &str,
    index_date: NaiveDate,
    dataset: &EhrDataset,
    cfg: &CohortConfig,
) -> (u32, u32) {
    let window_end = add_years(index_date, cfg.observation_years);
    let mut acute = 0u32;
    let mut chronic = 0u32;
    for cond in dataset.patient_conditions(patient_id) {
        if cond.start < index_date || cond.start >= window_end {
            continue;
        }
        match cond.stop {
            Some(stop) if (stop - cond.start).num_days() <= cfg.acute_resolution_days => acute += 1,
            _ => chronic += 1,
        }
    }
    (acute, chronic)
}

/// True iff any inpatient encounter starts within the outcome window.
pub fn compute_label(
    patient_id: &str,
    index_date: NaiveDate,
    dataset: &EhrDataset,
    cfg: &CohortConfig,
) -> bool {
    let outcome_start = midnight(add_years(index_date, cfg.observation_years));
    let outcome_end = midnight(add_years(index_date, cfg.observation_years + cfg.outcome_years));
    dataset
        .patient_encounters(patient_id)
        .any(|e| e.encounter_class == "inpatient" && e.start >= outcome_start && e.start < outcome_end)
}

fn build_row(
    patient: &PatientRecord,
    index_date: NaiveDate,
    dataset: &EhrDataset,
    cfg: &CohortConfig,
) -> CohortRow {
    let (acute, chronic) = classify_conditions(&patient.id, index_date, dataset, cfg);
    let (adherence_rate, low_adherence) = compute_adherence(&patient.id, index_date, dataset, cfg);
    CohortRow {
        patient_id: patient.id.clone(),
        index_date,
        age: age_years(patient.birth_date, index_date),
        gender_code: patient.gender.code(),
        acute_conditions: acute,
        chronic_conditions: chronic,
        wellness_perc: compute_wellness_perc(&patient.id, index_date, dataset, cfg),
        adherence_rate,
        low_adherence,
        expenses: patient.healthcare_expenses,
        coverage: patient.healthcare_coverage,
        label_inpatient: compute_label(&patient.id, index_date, dataset, cfg),
    }
}

impl CohortRow {
    /// Numeric feature vector in `FEATURE_NAMES` order. An absent adherence
    /// rate is imputed as 1.0 (no prescriptions means no refills missed).
    pub fn features(&self) -> [f64; 9] {
        [
            self.age as f64,
            self.gender_code,
            f64::from(self.acute_conditions),
            f64::from(self.chronic_conditions),
            self.wellness_perc,
            self.adherence_rate.unwrap_or(1.0),
            if self.low_adherence { 1.0 } else { 0.0 },
            self.expenses,
            self.coverage,
        ]
    }
}

pub struct Cohort {
    pub rows: Vec<CohortRow>,
    pub matrix: Array2<f64>,
    pub labels: Vec<bool>,
    pub feature_names: Vec<String>,
}

/// One row per eligible patient, ordered by ascending patient id.
pub fn build_feature_matrix(dataset: &EhrDataset, cfg: &CohortConfig) -> Result<Cohort, CohortError> {
    let eligible = filter_eligible(dataset, cfg);
    if eligible.is_empty() {
        return Err(CohortError::EmptyCohort);
    }
    let patient_by_id: std::collections::HashMap<&str, &PatientRecord> =
        dataset.patients.iter().map(|p| (p.id.as_str(), p)).collect();
    let rows: Vec<CohortRow> = eligible
        .iter()
        .map(|(id, index)| build_row(patient_by_id[id.as_str()], *index, dataset, cfg))
        .collect();

    let mut matrix = Array2::zeros((rows.len(), FEATURE_NAMES.len()));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.features().into_iter().enumerate() {
            debug_assert!(v.is_finite());
            matrix[[i, j]] = v;
        }
    }
    let labels = rows.iter().map(|r| r.label_inpatient).collect();
    Ok(Cohort {
        rows,
        matrix,
        labels,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
    })
}

/// Writes the cohort as CSV for inspection and downstream evaluation.
pub fn write_cohort_csv(cohort: &Cohort, path: &std::path::Path) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "patient_id,index_date,{},label_inpatient",
        FEATURE_NAMES.join(",")
    )?;
    for row in &cohort.rows {
        let feats = row
            .features()
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(
            f,
            "{},{},{},{}",
            row.patient_id, row.index_date, feats, row.label_inpatient
        )?;
    }
    Ok(())
}
