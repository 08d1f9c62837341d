//! Command-line front end for the hospitalization-risk pipeline.
//!
//! Exit codes: 0 success, 1 runtime/data failure, 2 usage/config failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hosprisk::cohort::build_feature_matrix;
use hosprisk::ehr::load_dataset;
use hosprisk::models::ModelKind;
use hosprisk::pipeline::{ingest_summary, recost_report, run_pipeline, PipelineError};
use hosprisk::report::EvaluationReport;
use hosprisk::runcfg::{ConfigError, Overrides, RunConfig};
use hosprisk::synthgen::{generate, manifest_check, GenError};

#[derive(Parser)]
#[command(name = "hosprisk", version, about = "Hospitalization-risk pipeline over EHR CSV exports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration JSON; defaults apply for absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (overrides config data_dir).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory (overrides config output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides config seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct CostArgs {
    /// Five-year preventive program cost per flagged patient.
    #[arg(long)]
    preventive_cost: Option<f64>,
    /// Average inpatient hospitalization cost.
    #[arg(long)]
    hosp_cost: Option<f64>,
    /// Fractional hospitalization risk reduction from the program.
    #[arg(long)]
    risk_reduction: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic CSV corpus plus its ground-truth manifest.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Verify the generated corpus against the manifest before exiting.
        #[arg(long)]
        check: bool,
    },
    /// Load and cross-validate a dataset directory; print table counts.
    IngestCheck {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build the cohort feature matrix and write cohort.csv.
    Cohort {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full pipeline: train, evaluate, analyze, and write report.json.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated model subset: logreg,gradient_boost,random_forest,mlp.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Classification threshold.
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        costs: CostArgs,
    },
    /// Recompute per-model ROI from an existing report under new costs.
    Roi {
        /// Path to an existing report.json.
        #[arg(long, default_value = "out/report.json")]
        report: PathBuf,
        #[command(flatten)]
        costs: CostArgs,
    },
    /// Print the summary table from an existing report.
    Report {
        /// Path to an existing report.json.
        #[arg(long, default_value = "out/report.json")]
        report: PathBuf,
    },
}

enum CliError {
    /// Bad flags or config: exit 2.
    Usage(String),
    /// Data or computation failure: exit 1.
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> CliError {
        match e {
            PipelineError::Config(c) => CliError::Usage(c.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> CliError {
        match e {
            GenError::InvalidConfig(_) | GenError::InfeasibleCorrelations => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        data_dir: common.data.clone(),
        output_dir: common.out.clone(),
        seed: common.seed,
        ..Default::default()
    };
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn parse_models(names: &[String]) -> Result<Vec<ModelKind>, CliError> {
    names
        .iter()
        .map(|n| ModelKind::parse(n).ok_or_else(|| CliError::Usage(format!("unknown model kind: {n}"))))
        .collect()
}

fn cmd_generate(common: &CommonArgs, check: bool) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    // --out takes priority for the corpus destination; otherwise generate
    // where a subsequent `run` will look for data
    let dest = common.out.clone().unwrap_or_else(|| cfg.data_dir.clone());
    let manifest = generate(&cfg.generator, &dest)?;
    println!(
        "generated {} patients ({} eligible) under {}",
        manifest.patients.len(),
        manifest.patients.iter().filter(|p| p.eligible).count(),
        dest.display()
    );
    if check {
        let report = manifest_check(&dest, &manifest, &cfg.cohort)?;
        for m in &report.mismatches {
            eprintln!("mismatch: {m}");
        }
        if !report.is_clean() {
            return Err(CliError::Runtime(format!("{} manifest mismatches", report.mismatches.len())));
        }
        println!("manifest check: {} patients verified, zero mismatches", report.patients_checked);
    }
    Ok(())
}

fn cmd_ingest_check(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let summary = ingest_summary(&cfg.data_dir, &cfg.files)?;
    print!("{summary}");
    Ok(())
}

fn cmd_cohort(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let dataset = load_dataset(&cfg.data_dir, &cfg.files).map_err(|e| CliError::Runtime(e.to_string()))?;
    let cohort = build_feature_matrix(&dataset, &cfg.cohort).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    let path = cfg.output_dir.join("cohort.csv");
    hosprisk::cohort::write_cohort_csv(&cohort, &path).map_err(|e| CliError::Runtime(e.to_string()))?;
    let n_pos = cohort.labels.iter().filter(|&&y| y).count();
    println!(
        "cohort: {} eligible patients, base rate {:.3}, written to {}",
        cohort.rows.len(),
        n_pos as f64 / cohort.labels.len() as f64,
        path.display()
    );
    Ok(())
}

fn cmd_run(
    common: &CommonArgs,
    models: Option<&[String]>,
    threshold: Option<f64>,
    costs: &CostArgs,
) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    let overrides = Overrides {
        threshold,
        models: models.map(parse_models).transpose()?,
        preventive_cost: costs.preventive_cost,
        hosp_cost: costs.hosp_cost,
        risk_reduction: costs.risk_reduction,
        ..Default::default()
    };
    overrides.apply(&mut cfg)?;
    let report = run_pipeline(&cfg)?;
    print!("{}", report.summary_table());
    println!("report written to {}", cfg.output_dir.join("report.json").display());
    Ok(())
}

fn load_report(path: &Path) -> Result<EvaluationReport, CliError> {
    EvaluationReport::load(path).map_err(|e| CliError::Usage(format!("cannot read report {}: {e}", path.display())))
}

fn cmd_roi(report_path: &Path, costs: &CostArgs) -> Result<(), CliError> {
    let report = load_report(report_path)?;
    let mut assumptions = hosprisk::roi::CostAssumptions::default();
    if let Some(c) = costs.preventive_cost {
        assumptions.preventive_cost_5yr = c;
    }
    if let Some(c) = costs.hosp_cost {
        assumptions.avg_hospitalization_cost = c;
    }
    if let Some(r) = costs.risk_reduction {
        assumptions.risk_reduction = r;
    }
    assumptions.validate().map_err(CliError::Usage)?;
    println!("{:<16} {:>9} {:>14} {:>16} {:>8}", "model", "flagged", "true_positive", "savings", "roi");
    for r in recost_report(&report, &assumptions) {
        let roi = r.roi.map(|v| format!("{:.1}%", v * 100.0)).unwrap_or_else(|| "-".into());
        println!(
            "{:<16} {:>9} {:>14} {:>16.2} {:>8}",
            r.model.name(),
            r.n_flagged,
            r.n_true_positive,
            r.predicted_savings,
            roi
        );
    }
    Ok(())
}

fn cmd_report(report_path: &Path) -> Result<(), CliError> {
    let report = load_report(report_path)?;
    print!("{}", report.summary_table());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate { common, check } => cmd_generate(common, *check),
        Command::IngestCheck { common } => cmd_ingest_check(common),
        Command::Cohort { common } => cmd_cohort(common),
        Command::Run {
            common,
            models,
            threshold,
            costs,
        } => cmd_run(common, models.as_deref(), *threshold, costs),
        Command::Roi { report, costs } => cmd_roi(report, costs),
        Command::Report { report } => cmd_report(report),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
