//! Evaluation report schema and emitters: one versioned JSON document per
//! run, plus plot-ready CSV extracts. Serialization order is fixed by the
//! struct layout, so identical runs produce byte-identical files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eval::{ConfusionMatrix, GridSearchResult, ImportanceTable, MetricSet, SubgroupImportance};
use crate::models::{HyperParams, ModelKind};
use crate::roi::{RoiReport, SensitivityPoint};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    pub best_params: HyperParams,
    pub cv: GridSearchResult,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub permutation_importance: ImportanceTable,
    /// Present for the tree ensembles only.
    pub impurity_importance: Option<ImportanceTable>,
    pub roi: RoiReport,
    pub sensitivity: Vec<SensitivityPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub model: ModelKind,
    pub feature: String,
    pub baseline_value: f64,
    pub treated_value: f64,
    /// 1 - treated/baseline mean risk over high-risk rows; absent when the
    /// model flagged nobody.
    pub risk_reduction: Option<f64>,
    pub n_high_risk: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub model: ModelKind,
    pub target_feature: String,
    pub grouping_feature: String,
    pub bins: Vec<SubgroupImportance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub seed: u64,
    /// SHA-256 of the exact run config JSON this report was produced from.
    pub config_sha256: String,
    pub n_patients: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub base_rate: f64,
    pub feature_names: Vec<String>,
    /// Pearson matrix over the full cohort, row-major, feature_names order.
    pub correlations: Vec<Vec<f64>>,
    pub correlation_warnings: Vec<String>,
    pub models: Vec<ModelReport>,
    pub subgroup: Option<SubgroupReport>,
    pub counterfactual: Option<CounterfactualReport>,
}

impl EvaluationReport {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("report serialization");
        std::fs::write(path, json + "\n")
    }

    pub fn load(path: &Path) -> Result<EvaluationReport, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn model(&self, kind: ModelKind) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == kind)
    }

    /// Table-2-shaped plain-text summary.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>9} {:>10} {:>8} {:>8} {:>8}\n",
            "model", "accuracy", "precision", "recall", "f1", "roi"
        ));
        for m in &self.models {
            let roi = m
                .roi
                .roi
                .map(|r| format!("{:.1}%", r * 100.0))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<16} {:>9.3} {:>10.3} {:>8.3} {:>8.3} {:>8}\n",
                m.model.name(),
                m.metrics.accuracy,
                m.metrics.precision,
                m.metrics.recall,
                m.metrics.f1,
                roi
            ));
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn writer(path: &Path) -> std::io::Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Long-format correlation matrix: row,column,value.
pub fn write_correlations_csv(path: &Path, feature_names: &[String], corr: &[Vec<f64>]) -> std::io::Result<()> {
    let mut f = writer(path)?;
    writeln!(f, "row,column,value")?;
    for (i, row) in corr.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            writeln!(f, "{},{},{v}", feature_names[i], feature_names[j])?;
        }
    }
    Ok(())
}

/// Global importance for every model: permutation plus (where defined)
/// impurity, tagged by mechanism.
pub fn write_importance_csv(path: &Path, models: &[ModelReport]) -> std::io::Result<()> {
    let mut f = writer(path)?;
    writeln!(f, "model,mechanism,feature,importance,raw")?;
    for m in models {
        for e in &m.permutation_importance.entries {
            writeln!(f, "{},permutation,{},{},{}", m.model.name(), e.feature, e.importance, e.raw)?;
        }
        if let Some(table) = &m.impurity_importance {
            for e in &table.entries {
                writeln!(f, "{},impurity,{},{},{}", m.model.name(), e.feature, e.importance, e.raw)?;
            }
        }
    }
    Ok(())
}

pub fn write_subgroup_csv(path: &Path, report: &SubgroupReport) -> std::io::Result<()> {
    let mut f = writer(path)?;
    writeln!(f, "model,target_feature,grouping_feature,bin,n_rows,importance,raw,reliable")?;
    for b in &report.bins {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            report.model.name(),
            report.target_feature,
            report.grouping_feature,
            b.bin,
            b.n_rows,
            b.importance,
            b.raw,
            b.reliable
        )?;
    }
    Ok(())
}

pub fn write_roi_sensitivity_csv(path: &Path, models: &[ModelReport]) -> std::io::Result<()> {
    let mut f = writer(path)?;
    writeln!(f, "model,threshold,precision,recall,roi,missed_savings")?;
    for m in models {
        for p in &m.sensitivity {
            let roi = p.roi.map(|r| r.to_string()).unwrap_or_default();
            writeln!(
                f,
                "{},{},{},{},{roi},{}",
                m.model.name(),
                p.threshold,
                p.metrics.precision,
                p.metrics.recall,
                p.missed_savings
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(sha256_hex(b"").len(), 64);
    }

    #[test]
    fn correlations_csv_is_long_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("correlations.csv");
        let names = vec!["a".to_string(), "b".to_string()];
        let corr = vec![vec![1.0, -0.5], vec![-0.5, 1.0]];
        write_correlations_csv(&path, &names, &corr).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "row,column,value");
        assert_eq!(lines[2], "a,b,-0.5");
    }
}
