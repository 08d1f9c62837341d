//! Synthetic Synthea-shaped corpus generator with a planted, configurable
//! risk model and correlation structure, plus a ground-truth manifest.
//!
//! Latent features are drawn from a correlated Gaussian copula and then
//! materialized as concrete records (wellness encounters, medication
//! dispenses, condition rows) placed so that cohort extraction recovers the
//! latent features exactly, not statistically. Residual randomness is
//! confined to the outcome draw.

pub mod gauss;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{build_feature_matrix, CohortConfig, FEATURE_NAMES};
use crate::dates::add_years;
use crate::ehr::{load_dataset, FileMap, Gender, IngestError};
use crate::models::sigmoid;
use crate::seed::rng_for;
use gauss::{cholesky, normal_cdf, poisson_quantile, std_normal};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("target correlations are not jointly feasible (matrix not positive definite)")]
    InfeasibleCorrelations,
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("cohort: {0}")]
    Cohort(#[from] crate::cohort::CohortError),
    #[error("manifest parse: {0}")]
    Manifest(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorrelationTarget {
    pub feature_a: String,
    pub feature_b: String,
    pub value: f64,
}

/// Multiplies the planted effect of `feature` when `conditioned_on` is at
/// least `condition_min`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InteractionTerm {
    pub feature: String,
    pub conditioned_on: String,
    pub condition_min: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    /// Extra patients planted ineligible (short history or mid-horizon death).
    pub n_ineligible: usize,
    pub seed: u64,
    pub base_rate: f64,
    pub target_correlations: Vec<CorrelationTarget>,
    /// Planted per-feature log-odds coefficients on the extracted features.
    pub effect_log_odds: BTreeMap<String, f64>,
    pub interaction_terms: Vec<InteractionTerm>,
    /// Total record-span range in years, sampled per patient.
    pub history_years_min: u32,
    pub history_years_max: u32,
    pub no_medication_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let mut effects = BTreeMap::new();
        effects.insert("age".to_string(), 0.07);
        effects.insert("acute_conditions".to_string(), 0.45);
        effects.insert("chronic_conditions".to_string(), 0.25);
        effects.insert("wellness_perc".to_string(), -1.35);
        effects.insert("low_adherence".to_string(), 0.9);
        GeneratorConfig {
            n_patients: 1171,
            n_ineligible: 0,
            seed: 7,
            base_rate: 0.45,
            target_correlations: vec![
                CorrelationTarget {
                    feature_a: "age".into(),
                    feature_b: "acute_conditions".into(),
                    value: -0.59,
                },
                CorrelationTarget {
                    feature_a: "age".into(),
                    feature_b: "wellness_perc".into(),
                    value: -0.27,
                },
                CorrelationTarget {
                    feature_a: "chronic_conditions".into(),
                    feature_b: "acute_conditions".into(),
                    value: -0.28,
                },
                CorrelationTarget {
                    feature_a: "gender_code".into(),
                    feature_b: "low_adherence".into(),
                    value: -0.17,
                },
            ],
            effect_log_odds: effects,
            interaction_terms: vec![InteractionTerm {
                feature: "wellness_perc".into(),
                conditioned_on: "acute_conditions".into(),
                condition_min: 2.0,
                multiplier: 2.0,
            }],
            history_years_min: 11,
            history_years_max: 14,
            no_medication_fraction: 0.05,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return Err(GenError::InvalidConfig("base_rate must lie in (0,1)".into()));
        }
        if self.history_years_min < 10 || self.history_years_max < self.history_years_min {
            return Err(GenError::InvalidConfig(
                "history years range must be [min, max] with min >= 10".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.no_medication_fraction) {
            return Err(GenError::InvalidConfig("no_medication_fraction must be in [0,1]".into()));
        }
        for t in &self.target_correlations {
            if t.value.abs() > 1.0 {
                return Err(GenError::InvalidConfig(format!(
                    "correlation target {} x {} out of [-1,1]",
                    t.feature_a, t.feature_b
                )));
            }
        }
        for name in self
            .effect_log_odds
            .keys()
            .map(String::as_str)
            .chain(self.target_correlations.iter().flat_map(|t| {
                [t.feature_a.as_str(), t.feature_b.as_str()]
            }))
            .chain(self.interaction_terms.iter().flat_map(|t| {
                [t.feature.as_str(), t.conditioned_on.as_str()]
            }))
        {
            if !FEATURE_NAMES.contains(&name) {
                return Err(GenError::InvalidConfig(format!("unknown feature {name}")));
            }
        }
        Ok(())
    }
}

/// The planted logistic outcome model, kept in the manifest so tests can
/// recompute true probabilities under counterfactual feature values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub intercept: f64,
    pub effects: BTreeMap<String, f64>,
    pub interactions: Vec<InteractionTerm>,
}

fn feature_index(name: &str) -> usize {
    FEATURE_NAMES
        .iter()
        .position(|&f| f == name)
        .unwrap_or_else(|| panic!("unknown feature {name}"))
}

impl OutcomeModel {
    /// Linear score without the intercept, over a row in FEATURE_NAMES order.
    pub fn linear_score(&self, features: &[f64]) -> f64 {
        let mut score = 0.0;
        for (name, beta) in &self.effects {
            score += beta * features[feature_index(name)];
        }
        for term in &self.interactions {
            if features[feature_index(&term.conditioned_on)] >= term.condition_min {
                let beta = self.effects.get(&term.feature).copied().unwrap_or(0.0);
                score += beta * (term.multiplier - 1.0) * features[feature_index(&term.feature)];
            }
        }
        score
    }

    pub fn probability(&self, features: &[f64]) -> f64 {
        sigmoid(self.intercept + self.linear_score(features))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestPatient {
    pub id: String,
    pub eligible: bool,
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
    pub true_probability: Option<f64>,
    pub label: Option<bool>,
}

impl ManifestPatient {
    /// Feature vector in cohort order, exactly as extraction recovers it
    /// (absent adherence imputed as 1.0).
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

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: GeneratorConfig,
    pub outcome_model: Option<OutcomeModel>,
    pub table_counts: BTreeMap<String, usize>,
    pub patients: Vec<ManifestPatient>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, GenError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

// latent dimensions behind the observed features; low_adherence shares the
// adherence_rate latent through the 0.8 threshold
const LATENTS: [&str; 8] = [
    "age",
    "gender_code",
    "acute_conditions",
    "chronic_conditions",
    "wellness_perc",
    "adherence_rate",
    "expenses",
    "coverage",
];

fn latent_of(observed: &str) -> (usize, f64) {
    if observed == "low_adherence" {
        // low adherence is adherence below threshold: the latent flips sign
        return (5, -1.0);
    }
    let idx = LATENTS
        .iter()
        .position(|&l| l == observed)
        .unwrap_or_else(|| panic!("feature {observed} has no latent dimension"));
    (idx, 1.0)
}

fn is_binary_observed(observed: &str) -> bool {
    observed == "gender_code" || observed == "low_adherence"
}

/// Compensates the attenuation that thresholding and count discretization
/// introduce between latent and observed correlations.
fn latent_rho(target: f64, a_binary: bool, b_binary: bool) -> f64 {
    let rho = match (a_binary, b_binary) {
        // both median dichotomized: observed = (2/pi) asin(rho)
        (true, true) => (std::f64::consts::FRAC_PI_2 * target).sin(),
        // point-biserial attenuation phi(0)/sqrt(p(1-p)) ~ 0.798 at p = 0.5
        (true, false) | (false, true) => target / 0.798,
        // mild attenuation from count/level discretization
        (false, false) => target / 0.93,
    };
    rho.clamp(-0.97, 0.97)
}

fn latent_correlation_matrix(config: &GeneratorConfig) -> Result<Vec<f64>, GenError> {
    let n = LATENTS.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    for t in &config.target_correlations {
        let (ia, sa) = latent_of(&t.feature_a);
        let (ib, sb) = latent_of(&t.feature_b);
        if ia == ib {
            return Err(GenError::InvalidConfig(format!(
                "correlation target {} x {} shares a latent dimension",
                t.feature_a, t.feature_b
            )));
        }
        let rho = latent_rho(
            t.value * sa * sb,
            is_binary_observed(&t.feature_a),
            is_binary_observed(&t.feature_b),
        );
        m[ia * n + ib] = rho;
        m[ib * n + ia] = rho;
    }
    Ok(m)
}

const MED_SUPPLY_DAYS: i64 = 1800;
const EXPECTED_REFILLS: u32 = 60; // ceil(1800 / 30)

struct LatentPatient {
    id: String,
    index_date: NaiveDate,
    birth_date: NaiveDate,
    age: u32,
    gender: Gender,
    acute: u32,
    chronic: u32,
    wellness_count: u32,
    /// (dispenses, expected refills); None for no-medication patients.
    medication: Option<(u32, u32)>,
    expenses: f64,
    coverage: f64,
    span_years: u32,
}

impl LatentPatient {
    fn adherence_rate(&self) -> Option<f64> {
        self.medication
            .map(|(d, e)| (f64::from(d) / f64::from(e)).min(1.0))
    }

    fn low_adherence(&self, threshold: f64) -> bool {
        self.adherence_rate().is_some_and(|r| r < threshold)
    }

    /// Feature vector in FEATURE_NAMES order; matches cohort extraction
    /// (absent adherence imputed as 1.0).
    fn features(&self, cohort: &CohortConfig) -> [f64; 9] {
        let rate = self.adherence_rate();
        [
            f64::from(self.age),
            self.gender.code(),
            f64::from(self.acute),
            f64::from(self.chronic),
            (f64::from(self.wellness_count) / f64::from(cohort.observation_years)).min(1.0),
            rate.unwrap_or(1.0),
            if self.low_adherence(cohort.adherence_threshold) { 1.0 } else { 0.0 },
            self.expenses,
            self.coverage,
        ]
    }
}

fn cents(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn index_date_for(i: usize) -> NaiveDate {
    // spread index dates over 2000-03-10 .. 2000-12-25; no Feb 29 is ever
    // produced, so birth dates (same month/day, earlier year) always exist
    NaiveDate::from_ymd_opt(2000, 3, 10).unwrap() + Duration::days((i * 37 % 290) as i64)
}

fn draw_patient(i: usize, config: &GeneratorConfig, chol: &[f64]) -> LatentPatient {
    let n = LATENTS.len();
    let mut rng = rng_for(config.seed, "patient", i as u64);
    let g: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
    let mut z = vec![0.0; n];
    for r in 0..n {
        z[r] = (0..=r).map(|c| chol[r * n + c] * g[c]).sum();
    }
    let u: Vec<f64> = z.iter().map(|&v| normal_cdf(v)).collect();

    let age = 18 + ((u[0] * 73.0).floor() as u32).min(72);
    let gender = if z[1] > 0.0 { Gender::M } else { Gender::F };
    let acute = poisson_quantile(u[2], 1.5, 8);
    let chronic = poisson_quantile(u[3], 1.8, 10);
    let wellness_count = ((u[4] * 6.0).floor() as u32).min(5);
    let has_meds: bool = rng.gen::<f64>() >= config.no_medication_fraction;
    let medication = has_meds.then(|| {
        let target = 0.55 + 0.5 * u[5];
        let dispenses = ((target * f64::from(EXPECTED_REFILLS)).round() as u32).clamp(1, EXPECTED_REFILLS);
        (dispenses, EXPECTED_REFILLS)
    });
    let expenses = cents((8.5 + 0.8 * z[6]).exp());
    let coverage = cents((8.0 + 0.8 * z[7]).exp());
    let span_years = rng.gen_range(config.history_years_min..=config.history_years_max);

    let index_date = index_date_for(i);
    let birth_date = NaiveDate::from_ymd_opt(index_date.year() - age as i32, index_date.month(), index_date.day())
        .expect("birth date construction");
    LatentPatient {
        id: format!("p{i:05}"),
        index_date,
        birth_date,
        age,
        gender,
        acute,
        chronic,
        wellness_count,
        medication,
        expenses,
        coverage,
        span_years,
    }
}

fn calibrate_intercept(scores: &[f64], base_rate: f64) -> f64 {
    let mut lo = -30.0;
    let mut hi = 30.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mean: f64 = scores.iter().map(|&s| sigmoid(mid + s)).sum::<f64>() / scores.len() as f64;
        if mean < base_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct Tables {
    patients: Vec<String>,
    encounters: Vec<String>,
    conditions: Vec<String>,
    medications: Vec<String>,
    procedures: Vec<String>,
    immunizations: Vec<String>,
    observations: Vec<String>,
    imaging_studies: Vec<String>,
    allergies: Vec<String>,
    payers: Vec<String>,
    providers: Vec<String>,
}

impl Tables {
    fn new() -> Tables {
        Tables {
            patients: Vec::new(),
            encounters: Vec::new(),
            conditions: Vec::new(),
            medications: Vec::new(),
            procedures: Vec::new(),
            immunizations: Vec::new(),
            observations: Vec::new(),
            imaging_studies: Vec::new(),
            allergies: Vec::new(),
            payers: Vec::new(),
            providers: Vec::new(),
        }
    }

    fn counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        m.insert("patients".into(), self.patients.len());
        m.insert("encounters".into(), self.encounters.len());
        m.insert("conditions".into(), self.conditions.len());
        m.insert("medications".into(), self.medications.len());
        m.insert("procedures".into(), self.procedures.len());
        m.insert("immunizations".into(), self.immunizations.len());
        m.insert("observations".into(), self.observations.len());
        m.insert("imaging_studies".into(), self.imaging_studies.len());
        m.insert("allergies".into(), self.allergies.len());
        m.insert("payers".into(), self.payers.len());
        m.insert("providers".into(), self.providers.len());
        m
    }
}

fn encounter_row(id: &str, date: NaiveDate, patient: &str, class: &str, cost: f64, covered: f64) -> String {
    format!("{id},{date},,{patient},{class},ENC-{class},{cost:.2},{covered:.2}")
}

fn emit_patient_rows(t: &mut Tables, p: &LatentPatient, label: bool, death: Option<NaiveDate>, i: usize) {
    let id = &p.id;
    t.patients.push(format!(
        "{},{},{},{},{:.2},{:.2}",
        id,
        p.birth_date,
        death.map(|d| d.to_string()).unwrap_or_default(),
        p.gender,
        p.expenses,
        p.coverage
    ));

    let base_enc = format!("{id}-e0");
    t.encounters.push(encounter_row(&base_enc, p.index_date, id, "ambulatory", 120.0, 80.0));
    for j in 0..p.wellness_count {
        t.encounters.push(encounter_row(
            &format!("{id}-w{j}"),
            p.index_date + Duration::days(40 + 330 * i64::from(j)),
            id,
            "wellness",
            95.0,
            60.0,
        ));
    }
    if label {
        t.encounters.push(encounter_row(
            &format!("{id}-ip"),
            add_years(p.index_date, 5) + Duration::days(180),
            id,
            "inpatient",
            10924.0,
            8000.0,
        ));
    }
    t.encounters.push(encounter_row(
        &format!("{id}-z"),
        add_years(p.index_date, p.span_years) + Duration::days(10),
        id,
        "ambulatory",
        110.0,
        70.0,
    ));

    for j in 0..p.acute {
        let start = p.index_date + Duration::days(50 + 17 * i64::from(j));
        t.conditions.push(format!(
            "{start},{stop},{id},{base_enc},C-A{j},acute condition",
            stop = start + Duration::days(20)
        ));
    }
    for j in 0..p.chronic {
        let start = p.index_date + Duration::days(60 + 23 * i64::from(j));
        t.conditions
            .push(format!("{start},,{id},{base_enc},C-C{j},chronic condition"));
    }

    if let Some((dispenses, _)) = p.medication {
        let start = p.index_date + Duration::days(5);
        let stop = start + Duration::days(MED_SUPPLY_DAYS);
        let total = cents(f64::from(dispenses) * 12.5);
        t.medications.push(format!(
            "{start},{stop},{id},{base_enc},RX1,12.50,4.00,{dispenses},{total:.2}"
        ));
    }

    t.procedures
        .push(format!("{},{id},PROC1,250.00", p.index_date + Duration::days(70)));
    t.immunizations
        .push(format!("{},{id},IMM1,140.00", p.index_date + Duration::days(80)));
    t.observations
        .push(format!("{},{id},OBS1", p.index_date + Duration::days(15)));
    t.observations
        .push(format!("{},{id},OBS2", p.index_date + Duration::days(380)));
    if i.is_multiple_of(13) {
        t.imaging_studies.push(format!(
            "{id}-img,{},{id},BS-CHEST",
            p.index_date + Duration::days(95)
        ));
    }
    if i.is_multiple_of(7) {
        t.allergies
            .push(format!("{},{id},ALG1", p.index_date + Duration::days(30)));
    }
}

fn write_table(dir: &Path, name: &str, header: &str, rows: &[String]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{row}")?;
    }
    Ok(())
}

/// Generates the eleven CSV files plus `manifest.json` under `out_dir`.
pub fn generate(config: &GeneratorConfig, out_dir: &Path) -> Result<Manifest, GenError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let cohort_cfg = CohortConfig::default();
    let n = LATENTS.len();
    let latent = latent_correlation_matrix(config)?;
    let chol = cholesky(&latent, n).ok_or(GenError::InfeasibleCorrelations)?;

    let eligible: Vec<LatentPatient> = (0..config.n_patients)
        .map(|i| draw_patient(i, config, &chol))
        .collect();

    let outcome_model = if eligible.is_empty() {
        None
    } else {
        let partial = OutcomeModel {
            intercept: 0.0,
            effects: config.effect_log_odds.clone(),
            interactions: config.interaction_terms.clone(),
        };
        let scores: Vec<f64> = eligible
            .iter()
            .map(|p| partial.linear_score(&p.features(&cohort_cfg)))
            .collect();
        Some(OutcomeModel {
            intercept: calibrate_intercept(&scores, config.base_rate),
            ..partial
        })
    };

    let mut tables = Tables::new();
    let mut manifest_patients = Vec::with_capacity(config.n_patients + config.n_ineligible);

    for (i, p) in eligible.iter().enumerate() {
        let model = outcome_model.as_ref().unwrap();
        let features = p.features(&cohort_cfg);
        let prob = model.probability(&features);
        let label = rng_for(config.seed, "outcome", i as u64).gen::<f64>() < prob;
        emit_patient_rows(&mut tables, p, label, None, i);
        manifest_patients.push(ManifestPatient {
            id: p.id.clone(),
            eligible: true,
            index_date: p.index_date,
            age: i64::from(p.age),
            gender_code: p.gender.code(),
            acute_conditions: p.acute,
            chronic_conditions: p.chronic,
            wellness_perc: features[4],
            adherence_rate: p.adherence_rate(),
            low_adherence: p.low_adherence(cohort_cfg.adherence_threshold),
            expenses: p.expenses,
            coverage: p.coverage,
            true_probability: Some(prob),
            label: Some(label),
        });
    }

    for j in 0..config.n_ineligible {
        let i = config.n_patients + j;
        let id = format!("q{j:05}");
        let index = index_date_for(i);
        let birth = NaiveDate::from_ymd_opt(index.year() - 50, index.month(), index.day()).unwrap();
        let (death, final_date) = if j % 2 == 0 {
            // too little history
            (None, add_years(index, 4))
        } else {
            // enough span but dead mid-horizon
            (Some(add_years(index, 7)), add_years(index, 11))
        };
        tables.patients.push(format!(
            "{id},{birth},{},F,1000.00,500.00",
            death.map(|d| d.to_string()).unwrap_or_default()
        ));
        tables
            .encounters
            .push(encounter_row(&format!("{id}-e0"), index, &id, "ambulatory", 100.0, 60.0));
        tables
            .encounters
            .push(encounter_row(&format!("{id}-z"), final_date, &id, "ambulatory", 100.0, 60.0));
        manifest_patients.push(ManifestPatient {
            id,
            eligible: false,
            index_date: index,
            age: 50,
            gender_code: Gender::F.code(),
            acute_conditions: 0,
            chronic_conditions: 0,
            wellness_perc: 0.0,
            adherence_rate: None,
            low_adherence: false,
            expenses: 1000.0,
            coverage: 500.0,
            true_probability: None,
            label: None,
        });
    }

    // backfill rows for tables a small corpus would otherwise leave empty;
    // placed in the first patient's outcome window so no feature or label
    // can change
    if let Some(first) = manifest_patients.first() {
        let id = &first.id;
        let anchor = add_years(first.index_date, 6);
        if tables.conditions.is_empty() {
            tables.conditions.push(format!(
                "{anchor},{},{id},{id}-e0,C-FILL,post-window condition",
                anchor + Duration::days(10)
            ));
        }
        if tables.medications.is_empty() {
            let start = anchor + Duration::days(1);
            tables.medications.push(format!(
                "{start},{},{id},{id}-e0,RX-FILL,10.00,2.00,1,10.00",
                start + Duration::days(30)
            ));
        }
        if tables.allergies.is_empty() {
            tables.allergies.push(format!("{anchor},{id},ALG1"));
        }
        if tables.imaging_studies.is_empty() {
            tables.imaging_studies.push(format!("{id}-img,{anchor},{id},BS-CHEST"));
        }
    }

    tables.payers.push("pay001,Acme Health".into());
    tables.payers.push("pay002,Umbrella Mutual".into());
    tables.providers.push("prov001,General Hospital".into());
    tables.providers.push("prov002,Riverside Clinic".into());
    tables.providers.push("prov003,Summit Care".into());

    let files = FileMap::default();
    write_table(
        out_dir,
        &files.patients,
        "Id,BIRTHDATE,DEATHDATE,GENDER,HEALTHCARE_EXPENSES,HEALTHCARE_COVERAGE",
        &tables.patients,
    )?;
    write_table(
        out_dir,
        &files.encounters,
        "Id,START,STOP,PATIENT,ENCOUNTERCLASS,CODE,TOTAL_CLAIM_COST,PAYER_COVERAGE",
        &tables.encounters,
    )?;
    write_table(
        out_dir,
        &files.conditions,
        "START,STOP,PATIENT,ENCOUNTER,CODE,DESCRIPTION",
        &tables.conditions,
    )?;
    write_table(
        out_dir,
        &files.medications,
        "START,STOP,PATIENT,ENCOUNTER,CODE,BASE_COST,PAYER_COVERAGE,DISPENSES,TOTALCOST",
        &tables.medications,
    )?;
    write_table(out_dir, &files.procedures, "START,PATIENT,CODE,BASE_COST", &tables.procedures)?;
    write_table(
        out_dir,
        &files.immunizations,
        "DATE,PATIENT,CODE,BASE_COST",
        &tables.immunizations,
    )?;
    write_table(out_dir, &files.observations, "DATE,PATIENT,CODE", &tables.observations)?;
    write_table(
        out_dir,
        &files.imaging_studies,
        "Id,DATE,PATIENT,BODYSITE_CODE",
        &tables.imaging_studies,
    )?;
    write_table(out_dir, &files.allergies, "START,PATIENT,CODE", &tables.allergies)?;
    write_table(out_dir, &files.payers, "Id,NAME", &tables.payers)?;
    write_table(out_dir, &files.providers, "Id,NAME", &tables.providers)?;

    let manifest = Manifest {
        seed: config.seed,
        config: config.clone(),
        outcome_model,
        table_counts: tables.counts(),
        patients: manifest_patients,
    };
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub patients_checked: usize,
    pub mismatches: Vec<String>,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn cmp_f64(mismatches: &mut Vec<String>, id: &str, what: &str, extracted: f64, expected: f64) {
    if extracted != expected {
        mismatches.push(format!("{id}: {what} extracted {extracted} vs manifest {expected}"));
    }
}

/// Runs the real ingest + cohort pipeline over a generated corpus and
/// compares every extracted feature and label against the manifest, exactly.
pub fn manifest_check(dataset_dir: &Path, manifest: &Manifest, cohort_cfg: &CohortConfig) -> Result<CheckReport, GenError> {
    let files = FileMap::default();
    let dataset = load_dataset(dataset_dir, &files)?;
    let mut mismatches = Vec::new();

    for (table, &expected) in &manifest.table_counts {
        let actual = dataset.table_counts().get(table).copied().unwrap_or(0);
        if actual != expected {
            mismatches.push(format!("table {table}: {actual} records vs manifest {expected}"));
        }
    }

    let cohort = build_feature_matrix(&dataset, cohort_cfg)?;
    let extracted: BTreeMap<&str, &crate::cohort::CohortRow> =
        cohort.rows.iter().map(|r| (r.patient_id.as_str(), r)).collect();

    let mut checked = 0usize;
    for mp in &manifest.patients {
        let row = extracted.get(mp.id.as_str());
        if !mp.eligible {
            if row.is_some() {
                mismatches.push(format!("{}: ineligible patient appears in cohort", mp.id));
            }
            continue;
        }
        let Some(row) = row else {
            mismatches.push(format!("{}: eligible patient missing from cohort", mp.id));
            continue;
        };
        checked += 1;
        if row.index_date != mp.index_date {
            mismatches.push(format!(
                "{}: index date {} vs manifest {}",
                mp.id, row.index_date, mp.index_date
            ));
        }
        cmp_f64(&mut mismatches, &mp.id, "age", row.age as f64, mp.age as f64);
        cmp_f64(&mut mismatches, &mp.id, "gender_code", row.gender_code, mp.gender_code);
        cmp_f64(
            &mut mismatches,
            &mp.id,
            "acute_conditions",
            f64::from(row.acute_conditions),
            f64::from(mp.acute_conditions),
        );
        cmp_f64(
            &mut mismatches,
            &mp.id,
            "chronic_conditions",
            f64::from(row.chronic_conditions),
            f64::from(mp.chronic_conditions),
        );
        cmp_f64(&mut mismatches, &mp.id, "wellness_perc", row.wellness_perc, mp.wellness_perc);
        match (row.adherence_rate, mp.adherence_rate) {
            (Some(a), Some(b)) => cmp_f64(&mut mismatches, &mp.id, "adherence_rate", a, b),
            (None, None) => {}
            (a, b) => mismatches.push(format!("{}: adherence presence {a:?} vs manifest {b:?}", mp.id)),
        }
        if row.low_adherence != mp.low_adherence {
            mismatches.push(format!("{}: low_adherence flag mismatch", mp.id));
        }
        cmp_f64(&mut mismatches, &mp.id, "expenses", row.expenses, mp.expenses);
        cmp_f64(&mut mismatches, &mp.id, "coverage", row.coverage, mp.coverage);
        if Some(row.label_inpatient) != mp.label {
            mismatches.push(format!(
                "{}: label {} vs manifest {:?}",
                mp.id, row.label_inpatient, mp.label
            ));
        }
    }

    let manifest_eligible: std::collections::HashSet<&str> = manifest
        .patients
        .iter()
        .filter(|p| p.eligible)
        .map(|p| p.id.as_str())
        .collect();
    for row in &cohort.rows {
        if !manifest_eligible.contains(row.patient_id.as_str()) {
            mismatches.push(format!("{}: cohort patient unknown to manifest", row.patient_id));
        }
    }

    Ok(CheckReport {
        patients_checked: checked,
        mismatches,
    })
}
