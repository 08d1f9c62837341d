//! Hospitalization-risk pipeline over Synthea-style EHR CSV exports:
//! ingestion, cohort feature engineering, four from-scratch classifiers,
//! evaluation and importance analysis, preventive-care ROI, and a synthetic
//! corpus generator that doubles as the test oracle.

pub mod cohort;
pub mod dates;
pub mod ehr;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod roi;
pub mod runcfg;
pub mod seed;
pub mod synthgen;
