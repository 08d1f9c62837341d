//! Ingest of Synthea-style CSV exports: typed parsing of the eleven tables,
//! referential-integrity validation, and per-patient indexes.
//!
//! Column names follow the open Synthea CSV export convention, matched
//! case-insensitively. Unknown extra columns are ignored with a warning.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::{parse_date, parse_timestamp};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: file has no data rows")]
    EmptyFile { path: PathBuf },
    #[error("{path}: header is missing required column {column}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: line {line}, column {column}: {message}")]
    TypeError {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },
    #[error("missing table file {path}")]
    MissingTable { path: PathBuf },
    #[error("{table}: {count} dangling references, first offender: {first}")]
    DanglingReference {
        table: &'static str,
        count: usize,
        first: String,
    },
    #[error("{path}: duplicate patient id {id}")]
    DuplicateId { path: PathBuf, id: String },
    #[error("{path}: malformed csv at line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    /// Fixed numeric coding: F=0, M=1.
    pub fn code(self) -> f64 {
        match self {
            Gender::F => 0.0,
            Gender::M => 1.0,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::F => "F",
            Gender::M => "M",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub birth_date: NaiveDate,
    pub death_date: Option<NaiveDate>,
    pub gender: Gender,
    pub healthcare_expenses: f64,
    pub healthcare_coverage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncounterRecord {
    pub id: String,
    pub start: DateTime<Utc>,
    pub stop: Option<DateTime<Utc>>,
    pub patient_id: String,
    pub encounter_class: String,
    pub code: String,
    pub total_claim_cost: f64,
    pub payer_coverage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub start: NaiveDate,
    pub stop: Option<NaiveDate>,
    pub patient_id: String,
    pub encounter_id: String,
    pub code: String,
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MedicationRecord {
    pub start: DateTime<Utc>,
    pub stop: Option<DateTime<Utc>>,
    pub patient_id: String,
    pub encounter_id: String,
    pub code: String,
    pub base_cost: f64,
    pub payer_coverage: f64,
    pub dispenses: u32,
    pub total_cost: f64,
}

/// Minimal typed form of the seven auxiliary tables (procedures,
/// immunizations, observations, imaging studies, allergies, payers,
/// providers). These are validated but carry no model features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxRecord {
    pub id: Option<String>,
    pub patient_id: Option<String>,
    pub date: Option<DateTime<Utc>>,
    pub code: Option<String>,
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuxTable {
    Procedures,
    Immunizations,
    Observations,
    ImagingStudies,
    Allergies,
    Payers,
    Providers,
}

pub const AUX_TABLES: [AuxTable; 7] = [
    AuxTable::Procedures,
    AuxTable::Immunizations,
    AuxTable::Observations,
    AuxTable::ImagingStudies,
    AuxTable::Allergies,
    AuxTable::Payers,
    AuxTable::Providers,
];

impl AuxTable {
    pub fn name(self) -> &'static str {
        match self {
            AuxTable::Procedures => "procedures",
            AuxTable::Immunizations => "immunizations",
            AuxTable::Observations => "observations",
            AuxTable::ImagingStudies => "imaging_studies",
            AuxTable::Allergies => "allergies",
            AuxTable::Payers => "payers",
            AuxTable::Providers => "providers",
        }
    }

    fn has_patient(self) -> bool {
        !matches!(self, AuxTable::Payers | AuxTable::Providers)
    }

    /// Candidate column names for each minimal field, in priority order.
    fn columns(self) -> AuxColumns {
        match self {
            AuxTable::Procedures => AuxColumns {
                id: &[],
                patient: &["PATIENT"],
                date: &["START", "DATE"],
                code: &["CODE"],
                cost: &["BASE_COST"],
            },
            AuxTable::Immunizations => AuxColumns {
                id: &[],
                patient: &["PATIENT"],
                date: &["DATE"],
                code: &["CODE"],
                cost: &["BASE_COST"],
            },
            AuxTable::Observations => AuxColumns {
                id: &[],
                patient: &["PATIENT"],
                date: &["DATE"],
                code: &["CODE"],
                cost: &[],
            },
            AuxTable::ImagingStudies => AuxColumns {
                id: &["ID"],
                patient: &["PATIENT"],
                date: &["DATE"],
                code: &["BODYSITE_CODE", "CODE"],
                cost: &[],
            },
            AuxTable::Allergies => AuxColumns {
                id: &[],
                patient: &["PATIENT"],
                date: &["START"],
                code: &["CODE"],
                cost: &[],
            },
            AuxTable::Payers => AuxColumns {
                id: &["ID"],
                patient: &[],
                date: &[],
                code: &[],
                cost: &[],
            },
            AuxTable::Providers => AuxColumns {
                id: &["ID"],
                patient: &[],
                date: &[],
                code: &[],
                cost: &[],
            },
        }
    }
}

struct AuxColumns {
    id: &'static [&'static str],
    patient: &'static [&'static str],
    date: &'static [&'static str],
    code: &'static [&'static str],
    cost: &'static [&'static str],
}

/// Table-name → file-name map, overridable via run config.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(default)]
pub struct FileMap {
    pub patients: String,
    pub encounters: String,
    pub conditions: String,
    pub medications: String,
    pub procedures: String,
    pub immunizations: String,
    pub observations: String,
    pub imaging_studies: String,
    pub allergies: String,
    pub payers: String,
    pub providers: String,
}

impl Default for FileMap {
    fn default() -> Self {
        FileMap {
            patients: "patients.csv".into(),
            encounters: "encounters.csv".into(),
            conditions: "conditions.csv".into(),
            medications: "medications.csv".into(),
            procedures: "procedures.csv".into(),
            immunizations: "immunizations.csv".into(),
            observations: "observations.csv".into(),
            imaging_studies: "imaging_studies.csv".into(),
            allergies: "allergies.csv".into(),
            payers: "payers.csv".into(),
            providers: "providers.csv".into(),
        }
    }
}

impl FileMap {
    pub fn aux_file(&self, table: AuxTable) -> &str {
        match table {
            AuxTable::Procedures => &self.procedures,
            AuxTable::Immunizations => &self.immunizations,
            AuxTable::Observations => &self.observations,
            AuxTable::ImagingStudies => &self.imaging_studies,
            AuxTable::Allergies => &self.allergies,
            AuxTable::Payers => &self.payers,
            AuxTable::Providers => &self.providers,
        }
    }
}

/// In-memory, referentially validated form of the eleven tables.
#[derive(Debug)]
pub struct EhrDataset {
    pub patients: Vec<PatientRecord>,
    pub encounters: Vec<EncounterRecord>,
    pub conditions: Vec<ConditionRecord>,
    pub medications: Vec<MedicationRecord>,
    pub aux: HashMap<AuxTable, Vec<AuxRecord>>,
    /// patient_id → indexes into the flat tables
    pub encounters_by_patient: HashMap<String, Vec<usize>>,
    pub conditions_by_patient: HashMap<String, Vec<usize>>,
    pub medications_by_patient: HashMap<String, Vec<usize>>,
    pub warnings: Vec<String>,
}

impl EhrDataset {
    pub fn patient_encounters(&self, patient_id: &str) -> impl Iterator<Item = &EncounterRecord> {
        self.encounters_by_patient
            .get(patient_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.encounters[i])
    }

    pub fn patient_conditions(&self, patient_id: &str) -> impl Iterator<Item = &ConditionRecord> {
        self.conditions_by_patient
            .get(patient_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.conditions[i])
    }

    pub fn patient_medications(&self, patient_id: &str) -> impl Iterator<Item = &MedicationRecord> {
        self.medications_by_patient
            .get(patient_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.medications[i])
    }

    /// Record counts per table, keyed by table name.
    pub fn table_counts(&self) -> HashMap<String, usize> {
        let mut m = HashMap::new();
        m.insert("patients".to_string(), self.patients.len());
        m.insert("encounters".to_string(), self.encounters.len());
        m.insert("conditions".to_string(), self.conditions.len());
        m.insert("medications".to_string(), self.medications.len());
        for t in AUX_TABLES {
            m.insert(t.name().to_string(), self.aux[&t].len());
        }
        m
    }
}

/// Header with case-insensitive column lookup and unknown-column tracking.
struct Header {
    path: PathBuf,
    index: HashMap<String, usize>,
    used: HashSet<usize>,
    names: Vec<String>,
}

impl Header {
    fn read(path: &Path, rdr: &mut csv::Reader<std::fs::File>) -> Result<Header, IngestError> {
        let headers = rdr.headers().map_err(|e| IngestError::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
        let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
        let mut index = HashMap::new();
        for (i, h) in names.iter().enumerate() {
            index.insert(h.to_uppercase(), i);
        }
        Ok(Header {
            path: path.to_path_buf(),
            index,
            used: HashSet::new(),
            names,
        })
    }

    fn require(&mut self, name: &str) -> Result<usize, IngestError> {
        match self.index.get(&name.to_uppercase()) {
            Some(&i) => {
                self.used.insert(i);
                Ok(i)
            }
            None => Err(IngestError::MissingColumn {
                path: self.path.clone(),
                column: name.to_string(),
            }),
        }
    }

    fn optional(&mut self, candidates: &[&str]) -> Option<usize> {
        for c in candidates {
            if let Some(&i) = self.index.get(&c.to_uppercase()) {
                self.used.insert(i);
                return Some(i);
            }
        }
        None
    }

    fn require_any(&mut self, candidates: &[&str]) -> Result<usize, IngestError> {
        self.optional(candidates)
            .ok_or_else(|| IngestError::MissingColumn {
                path: self.path.clone(),
                column: candidates.join("|"),
            })
    }

    fn unknown_warning(&self) -> Option<String> {
        let unknown: Vec<&str> = self
            .names
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.used.contains(i))
            .map(|(_, n)| n.as_str())
            .collect();
        if unknown.is_empty() {
            None
        } else {
            Some(format!(
                "{}: ignoring unknown columns: {}",
                self.path.display(),
                unknown.join(", ")
            ))
        }
    }
}

struct RowCtx<'a> {
    path: &'a Path,
    line: u64,
}

impl<'a> RowCtx<'a> {
    fn type_err(&self, column: &str, message: impl Into<String>) -> IngestError {
        IngestError::TypeError {
            path: self.path.to_path_buf(),
            line: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn field<'r>(&self, row: &'r csv::StringRecord, idx: usize, column: &str) -> Result<&'r str, IngestError> {
        row.get(idx)
            .ok_or_else(|| self.type_err(column, "row is short of columns"))
            .map(str::trim)
    }

    fn money(&self, row: &csv::StringRecord, idx: usize, column: &str) -> Result<f64, IngestError> {
        let raw = self.field(row, idx, column)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| self.type_err(column, format!("not a number: {raw:?}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(self.type_err(column, format!("money must be finite and nonnegative, got {raw}")));
        }
        Ok(v)
    }

    fn timestamp(&self, row: &csv::StringRecord, idx: usize, column: &str) -> Result<DateTime<Utc>, IngestError> {
        let raw = self.field(row, idx, column)?;
        parse_timestamp(raw).ok_or_else(|| self.type_err(column, format!("not an ISO-8601 date: {raw:?}")))
    }

    fn opt_timestamp(
        &self,
        row: &csv::StringRecord,
        idx: usize,
        column: &str,
    ) -> Result<Option<DateTime<Utc>>, IngestError> {
        let raw = self.field(row, idx, column)?;
        if raw.is_empty() {
            return Ok(None);
        }
        parse_timestamp(raw)
            .map(Some)
            .ok_or_else(|| self.type_err(column, format!("not an ISO-8601 date: {raw:?}")))
    }

    fn date(&self, row: &csv::StringRecord, idx: usize, column: &str) -> Result<NaiveDate, IngestError> {
        let raw = self.field(row, idx, column)?;
        parse_date(raw).ok_or_else(|| self.type_err(column, format!("not an ISO-8601 date: {raw:?}")))
    }

    fn opt_date(
        &self,
        row: &csv::StringRecord,
        idx: usize,
        column: &str,
    ) -> Result<Option<NaiveDate>, IngestError> {
        let raw = self.field(row, idx, column)?;
        if raw.is_empty() {
            return Ok(None);
        }
        parse_date(raw)
            .map(Some)
            .ok_or_else(|| self.type_err(column, format!("not an ISO-8601 date: {raw:?}")))
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    if !path.exists() {
        return Err(IngestError::MissingTable {
            path: path.to_path_buf(),
        });
    }
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

/// Runs a parse loop over data rows, reporting csv-level errors with line numbers.
fn for_each_row(
    path: &Path,
    rdr: &mut csv::Reader<std::fs::File>,
    mut f: impl FnMut(&RowCtx, &csv::StringRecord) -> Result<(), IngestError>,
) -> Result<u64, IngestError> {
    let mut count = 0u64;
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2; // header is line 1
        let row = row.map_err(|e| IngestError::Csv {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        f(&RowCtx { path, line }, &row)?;
        count += 1;
    }
    if count == 0 {
        return Err(IngestError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(count)
}

pub fn parse_patients(path: &Path, warnings: &mut Vec<String>) -> Result<Vec<PatientRecord>, IngestError> {
    let mut rdr = open_reader(path)?;
    let mut h = Header::read(path, &mut rdr)?;
    let id = h.require_any(&["ID"])?;
    let birth = h.require("BIRTHDATE")?;
    let death = h.require("DEATHDATE")?;
    let gender = h.require("GENDER")?;
    let expenses = h.require("HEALTHCARE_EXPENSES")?;
    let coverage = h.require("HEALTHCARE_COVERAGE")?;
    if let Some(w) = h.unknown_warning() {
        warnings.push(w);
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for_each_row(path, &mut rdr, |ctx, row| {
        let pid = ctx.field(row, id, "Id")?.to_string();
        if pid.is_empty() {
            return Err(ctx.type_err("Id", "patient id must be nonempty"));
        }
        if !seen.insert(pid.clone()) {
            return Err(IngestError::DuplicateId {
                path: path.to_path_buf(),
                id: pid,
            });
        }
        let birth_date = ctx.date(row, birth, "BIRTHDATE")?;
        let death_date = ctx.opt_date(row, death, "DEATHDATE")?;
        if let Some(d) = death_date {
            if d < birth_date {
                return Err(ctx.type_err("DEATHDATE", "death date precedes birth date"));
            }
        }
        let g = match ctx.field(row, gender, "GENDER")? {
            "M" | "m" => Gender::M,
            "F" | "f" => Gender::F,
            other => return Err(ctx.type_err("GENDER", format!("expected M or F, got {other:?}"))),
        };
        out.push(PatientRecord {
            id: pid,
            birth_date,
            death_date,
            gender: g,
            healthcare_expenses: ctx.money(row, expenses, "HEALTHCARE_EXPENSES")?,
            healthcare_coverage: ctx.money(row, coverage, "HEALTHCARE_COVERAGE")?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_encounters(path: &Path, warnings: &mut Vec<String>) -> Result<Vec<EncounterRecord>, IngestError> {
    let mut rdr = open_reader(path)?;
    let mut h = Header::read(path, &mut rdr)?;
    let id = h.require("ID")?;
    let start = h.require("START")?;
    let stop = h.require("STOP")?;
    let patient = h.require("PATIENT")?;
    let class = h.require("ENCOUNTERCLASS")?;
    let code = h.require("CODE")?;
    let total = h.require("TOTAL_CLAIM_COST")?;
    let payer_cov = h.require("PAYER_COVERAGE")?;
    if let Some(w) = h.unknown_warning() {
        warnings.push(w);
    }

    let mut out = Vec::new();
    for_each_row(path, &mut rdr, |ctx, row| {
        let start_t = ctx.timestamp(row, start, "START")?;
        let stop_t = ctx.opt_timestamp(row, stop, "STOP")?;
        if let Some(s) = stop_t {
            if s < start_t {
                return Err(ctx.type_err("STOP", "encounter stop precedes start"));
            }
        }
        out.push(EncounterRecord {
            id: ctx.field(row, id, "Id")?.to_string(),
            start: start_t,
            stop: stop_t,
            patient_id: ctx.field(row, patient, "PATIENT")?.to_string(),
            encounter_class: ctx.field(row, class, "ENCOUNTERCLASS")?.to_lowercase(),
            code: ctx.field(row, code, "CODE")?.to_string(),
            total_claim_cost: ctx.money(row, total, "TOTAL_CLAIM_COST")?,
            payer_coverage: ctx.money(row, payer_cov, "PAYER_COVERAGE")?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_conditions(path: &Path, warnings: &mut Vec<String>) -> Result<Vec<ConditionRecord>, IngestError> {
    let mut rdr = open_reader(path)?;
    let mut h = Header::read(path, &mut rdr)?;
    let start = h.require("START")?;
    let stop = h.require("STOP")?;
    let patient = h.require("PATIENT")?;
    let encounter = h.require("ENCOUNTER")?;
    let code = h.require("CODE")?;
    let description = h.require("DESCRIPTION")?;
    if let Some(w) = h.unknown_warning() {
        warnings.push(w);
    }

    let mut out = Vec::new();
    for_each_row(path, &mut rdr, |ctx, row| {
        let start_d = ctx.date(row, start, "START")?;
        let stop_d = ctx.opt_date(row, stop, "STOP")?;
        if let Some(s) = stop_d {
            if s < start_d {
                return Err(ctx.type_err("STOP", "condition stop precedes start"));
            }
        }
        out.push(ConditionRecord {
            start: start_d,
            stop: stop_d,
            patient_id: ctx.field(row, patient, "PATIENT")?.to_string(),
            encounter_id: ctx.field(row, encounter, "ENCOUNTER")?.to_string(),
            code: ctx.field(row, code, "CODE")?.to_string(),
            description: ctx.field(row, description, "DESCRIPTION")?.to_string(),
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_medications(path: &Path, warnings: &mut Vec<String>) -> Result<Vec<MedicationRecord>, IngestError> {
    let mut rdr = open_reader(path)?;
    let mut h = Header::read(path, &mut rdr)?;
    let start = h.require("START")?;
    let stop = h.require("STOP")?;
    let patient = h.require("PATIENT")?;
    let encounter = h.require("ENCOUNTER")?;
    let code = h.require("CODE")?;
    let base = h.require("BASE_COST")?;
    let payer_cov = h.require("PAYER_COVERAGE")?;
    let dispenses = h.require("DISPENSES")?;
    let total = h.require_any(&["TOTALCOST", "TOTAL_COST"])?;
    if let Some(w) = h.unknown_warning() {
        warnings.push(w);
    }

    let mut out = Vec::new();
    for_each_row(path, &mut rdr, |ctx, row| {
        let start_t = ctx.timestamp(row, start, "START")?;
        let stop_t = ctx.opt_timestamp(row, stop, "STOP")?;
        if let Some(s) = stop_t {
            if s < start_t {
                return Err(ctx.type_err("STOP", "medication stop precedes start"));
            }
        }
        let d_raw = ctx.field(row, dispenses, "DISPENSES")?;
        let d: u32 = d_raw
            .parse()
            .map_err(|_| ctx.type_err("DISPENSES", format!("not an integer: {d_raw:?}")))?;
        if d < 1 {
            return Err(ctx.type_err("DISPENSES", "dispenses must be at least 1"));
        }
        out.push(MedicationRecord {
            start: start_t,
            stop: stop_t,
            patient_id: ctx.field(row, patient, "PATIENT")?.to_string(),
            encounter_id: ctx.field(row, encounter, "ENCOUNTER")?.to_string(),
            code: ctx.field(row, code, "CODE")?.to_string(),
            base_cost: ctx.money(row, base, "BASE_COST")?,
            payer_coverage: ctx.money(row, payer_cov, "PAYER_COVERAGE")?,
            dispenses: d,
            total_cost: ctx.money(row, total, "TOTALCOST")?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_aux(path: &Path, table: AuxTable, warnings: &mut Vec<String>) -> Result<Vec<AuxRecord>, IngestError> {
    let mut rdr = open_reader(path)?;
    let mut h = Header::read(path, &mut rdr)?;
    let cols = table.columns();
    let id = if cols.id.is_empty() { None } else { Some(h.require_any(cols.id)?) };
    let patient = if cols.patient.is_empty() {
        None
    } else {
        Some(h.require_any(cols.patient)?)
    };
    let date = if cols.date.is_empty() {
        None
    } else {
        Some(h.require_any(cols.date)?)
    };
    let code = h.optional(cols.code);
    let cost = h.optional(cols.cost);
    // aux tables routinely carry many columns we don't model
    let _ = h.unknown_warning();
    let _ = warnings;

    let mut out = Vec::new();
    for_each_row(path, &mut rdr, |ctx, row| {
        let cost_v = match cost {
            Some(i) => Some(ctx.money(row, i, "BASE_COST")?),
            None => None,
        };
        out.push(AuxRecord {
            id: match id {
                Some(i) => Some(ctx.field(row, i, "Id")?.to_string()),
                None => None,
            },
            patient_id: match patient {
                Some(i) => Some(ctx.field(row, i, "PATIENT")?.to_string()),
                None => None,
            },
            date: match date {
                Some(i) => Some(ctx.timestamp(row, i, "DATE")?),
                None => None,
            },
            code: match code {
                Some(i) => Some(ctx.field(row, i, "CODE")?.to_string()),
                None => None,
            },
            cost: cost_v,
        });
        Ok(())
    })?;
    Ok(out)
}

fn check_patient_refs<'a>(
    table: &'static str,
    refs: impl Iterator<Item = (&'a str, &'a str)>,
    patients: &HashSet<&str>,
) -> Result<(), IngestError> {
    let mut count = 0usize;
    let mut first = None;
    for (record_id, patient_id) in refs {
        if !patients.contains(patient_id) {
            count += 1;
            if first.is_none() {
                first = Some(format!("{record_id} -> patient {patient_id}"));
            }
        }
    }
    match first {
        None => Ok(()),
        Some(first) => Err(IngestError::DanglingReference { table, count, first }),
    }
}

/// Loads and cross-validates all eleven tables from `dir`.
pub fn load_dataset(dir: &Path, files: &FileMap) -> Result<EhrDataset, IngestError> {
    let mut warnings = Vec::new();
    let patients = parse_patients(&dir.join(&files.patients), &mut warnings)?;
    let encounters = parse_encounters(&dir.join(&files.encounters), &mut warnings)?;
    let conditions = parse_conditions(&dir.join(&files.conditions), &mut warnings)?;
    let medications = parse_medications(&dir.join(&files.medications), &mut warnings)?;
    let mut aux = HashMap::new();
    for table in AUX_TABLES {
        let records = parse_aux(&dir.join(files.aux_file(table)), table, &mut warnings)?;
        aux.insert(table, records);
    }

    let patient_ids: HashSet<&str> = patients.iter().map(|p| p.id.as_str()).collect();
    check_patient_refs(
        "encounters",
        encounters.iter().map(|e| (e.id.as_str(), e.patient_id.as_str())),
        &patient_ids,
    )?;
    check_patient_refs(
        "conditions",
        conditions.iter().map(|c| (c.code.as_str(), c.patient_id.as_str())),
        &patient_ids,
    )?;
    check_patient_refs(
        "medications",
        medications.iter().map(|m| (m.code.as_str(), m.patient_id.as_str())),
        &patient_ids,
    )?;
    for table in AUX_TABLES {
        if table.has_patient() {
            check_patient_refs(
                table.name(),
                aux[&table]
                    .iter()
                    .filter_map(|r| r.patient_id.as_deref().map(|p| ("<row>", p))),
                &patient_ids,
            )?;
        }
    }

    let encounter_ids: HashSet<&str> = encounters.iter().map(|e| e.id.as_str()).collect();
    for c in &conditions {
        if !encounter_ids.contains(c.encounter_id.as_str()) {
            return Err(IngestError::DanglingReference {
                table: "conditions",
                count: 1,
                first: format!("condition {} -> encounter {}", c.code, c.encounter_id),
            });
        }
    }
    for m in &medications {
        if !encounter_ids.contains(m.encounter_id.as_str()) {
            return Err(IngestError::DanglingReference {
                table: "medications",
                count: 1,
                first: format!("medication {} -> encounter {}", m.code, m.encounter_id),
            });
        }
    }

    let mut encounters_by_patient: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, e) in encounters.iter().enumerate() {
        encounters_by_patient.entry(e.patient_id.clone()).or_default().push(i);
    }
    let mut conditions_by_patient: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, c) in conditions.iter().enumerate() {
        conditions_by_patient.entry(c.patient_id.clone()).or_default().push(i);
    }
    let mut medications_by_patient: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, m) in medications.iter().enumerate() {
        medications_by_patient.entry(m.patient_id.clone()).or_default().push(i);
    }

    Ok(EhrDataset {
        patients,
        encounters,
        conditions,
        medications,
        aux,
        encounters_by_patient,
        conditions_by_patient,
        medications_by_patient,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) {
        let mut f = std::fs::File::create(dir.join(name)).unwrap();
        f.write_all(content.as_bytes()).unwrap();
    }

    const PATIENT_HEADER: &str = "Id,BIRTHDATE,DEATHDATE,GENDER,HEALTHCARE_EXPENSES,HEALTHCARE_COVERAGE\n";

    #[test]
    fn parses_single_patient_row() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "patients.csv",
            &format!("{PATIENT_HEADER}p1,1960-01-02,,M,1234.5,600.0\n"),
        );
        let mut w = Vec::new();
        let ps = parse_patients(&dir.path().join("patients.csv"), &mut w).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].id, "p1");
        assert_eq!(ps[0].gender, Gender::M);
        assert!(ps[0].death_date.is_none());
        assert_eq!(ps[0].healthcare_expenses, 1234.5);
    }

    #[test]
    fn header_only_file_is_empty_error() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "patients.csv", PATIENT_HEADER);
        let mut w = Vec::new();
        let err = parse_patients(&dir.path().join("patients.csv"), &mut w).unwrap_err();
        assert!(matches!(err, IngestError::EmptyFile { .. }));
    }

    #[test]
    fn missing_required_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "patients.csv",
            "Id,BIRTHDATE,GENDER,HEALTHCARE_EXPENSES,HEALTHCARE_COVERAGE\np1,1960-01-02,M,1.0,1.0\n",
        );
        let mut w = Vec::new();
        let err = parse_patients(&dir.path().join("patients.csv"), &mut w).unwrap_err();
        match err {
            IngestError::MissingColumn { column, .. } => assert_eq!(column, "DEATHDATE"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn zero_dispenses_is_type_error_with_location() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "medications.csv",
            "START,STOP,PATIENT,ENCOUNTER,CODE,BASE_COST,PAYER_COVERAGE,DISPENSES,TOTALCOST\n\
             2001-01-01,2001-06-01,p1,e1,rx1,10.0,5.0,0,100.0\n",
        );
        let mut w = Vec::new();
        let err = parse_medications(&dir.path().join("medications.csv"), &mut w).unwrap_err();
        match err {
            IngestError::TypeError { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, "DISPENSES");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn negative_money_is_type_error() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "patients.csv",
            &format!("{PATIENT_HEADER}p1,1960-01-02,,F,-3.0,0.0\n"),
        );
        let mut w = Vec::new();
        let err = parse_patients(&dir.path().join("patients.csv"), &mut w).unwrap_err();
        assert!(matches!(err, IngestError::TypeError { .. }));
    }

    #[test]
    fn unknown_columns_warn_but_parse() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "patients.csv",
            "Id,BIRTHDATE,DEATHDATE,SSN,GENDER,HEALTHCARE_EXPENSES,HEALTHCARE_COVERAGE\n\
             p1,1960-01-02,,999-99-9999,F,0.0,0.0\n",
        );
        let mut w = Vec::new();
        let ps = parse_patients(&dir.path().join("patients.csv"), &mut w).unwrap();
        assert_eq!(ps.len(), 1);
        assert!(w.iter().any(|m| m.contains("SSN")));
    }
}
