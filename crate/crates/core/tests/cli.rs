//! Black-box tests of the `hosprisk` binary: exit codes, flag handling, and
//! emitted artifacts.

use std::path::Path;
use std::process::Output;

use hosprisk::report::EvaluationReport;
use hosprisk::runcfg::RunConfig;
use hosprisk::synthgen::GeneratorConfig;

fn hosprisk(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_hosprisk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_exit(out: &Output, code: i32, context: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{context}: stdout={} stderr={}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small corpus config written to disk; returns (config path, config).
fn small_run_config(dir: &Path) -> (std::path::PathBuf, RunConfig) {
    let cfg = RunConfig {
        data_dir: dir.join("data"),
        output_dir: dir.join("out"),
        generator: GeneratorConfig {
            n_patients: 200,
            n_ineligible: 5,
            ..Default::default()
        },
        ..Default::default()
    };
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.canonical_json()).unwrap();
    (path, cfg)
}

#[test]
fn generate_writes_eleven_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg_path, cfg) = small_run_config(dir.path());
    let out = hosprisk(&["generate", "--config", cfg_path.to_str().unwrap(), "--check"]);
    assert_exit(&out, 0, "generate");
    let mut csvs = 0;
    for entry in std::fs::read_dir(&cfg.data_dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name.ends_with(".csv") {
            csvs += 1;
        }
    }
    assert_eq!(csvs, 11);
    assert!(cfg.data_dir.join("manifest.json").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("zero mismatches"), "{stdout}");
}

#[test]
fn missing_config_exits_2_and_names_the_file() {
    let out = hosprisk(&["run", "--config", "/definitely/not/here.json"]);
    assert_exit(&out, 2, "missing config");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/definitely/not/here.json"), "{stderr}");
}

#[test]
fn missing_data_directory_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = hosprisk(&["ingest-check", "--data", dir.path().join("nowhere").to_str().unwrap()]);
    assert_exit(&out, 1, "ingest-check on absent data");
}

#[test]
fn unknown_model_kind_exits_2() {
    let out = hosprisk(&["run", "--models", "svm"]);
    assert_exit(&out, 2, "unknown model");
    assert!(String::from_utf8_lossy(&out.stderr).contains("svm"));
}

#[test]
fn full_cycle_run_roi_report() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg_path, cfg) = small_run_config(dir.path());
    let cfg_arg = cfg_path.to_str().unwrap();
    assert_exit(&hosprisk(&["generate", "--config", cfg_arg]), 0, "generate");
    assert_exit(&hosprisk(&["ingest-check", "--config", cfg_arg]), 0, "ingest-check");

    let cohort_out = hosprisk(&["cohort", "--config", cfg_arg]);
    assert_exit(&cohort_out, 0, "cohort");
    assert!(cfg.output_dir.join("cohort.csv").exists());

    // restrict to one model: the report must contain exactly that entry
    let run_out = hosprisk(&["run", "--config", cfg_arg, "--models", "logreg"]);
    assert_exit(&run_out, 0, "run");
    let report_path = cfg.output_dir.join("report.json");
    let report = EvaluationReport::load(&report_path).unwrap();
    assert_eq!(report.models.len(), 1);
    assert_eq!(report.models[0].model.name(), "logreg");
    for artifact in ["correlations.csv", "importance.csv", "roi_sensitivity.csv"] {
        assert!(cfg.output_dir.join(artifact).exists(), "{artifact}");
    }

    let roi_out = hosprisk(&["roi", "--report", report_path.to_str().unwrap()]);
    assert_exit(&roi_out, 0, "roi");
    assert!(String::from_utf8_lossy(&roi_out.stdout).contains("logreg"));

    // doubling both costs leaves ROI unchanged; the recomputation must run
    // without retraining and exit cleanly
    let recost = hosprisk(&[
        "roi",
        "--report",
        report_path.to_str().unwrap(),
        "--preventive-cost",
        "5160",
        "--hosp-cost",
        "21848",
    ]);
    assert_exit(&recost, 0, "roi with overrides");
    let last_roi = |out: &Output| {
        String::from_utf8_lossy(&out.stdout)
            .lines()
            .last()
            .and_then(|l| l.split_whitespace().last().map(str::to_string))
            .unwrap()
    };
    assert_eq!(last_roi(&roi_out), last_roi(&recost), "scaling both costs equally must not move ROI");

    let report_out = hosprisk(&["report", "--report", report_path.to_str().unwrap()]);
    assert_exit(&report_out, 0, "report");
    let text = String::from_utf8_lossy(&report_out.stdout);
    assert!(text.contains("accuracy") && text.contains("roi"), "{text}");
}

#[test]
fn roi_on_missing_report_exits_2() {
    let out = hosprisk(&["roi", "--report", "/nope/report.json"]);
    assert_exit(&out, 2, "roi without report");
}

#[test]
fn roi_reproduces_published_value_from_precision() {
    // a report whose logreg confusion matrix has precision 77/100 must
    // print ROI 22.9% under default costs
    let dir = tempfile::tempdir().unwrap();
    let (cfg_path, cfg) = small_run_config(dir.path());
    let cfg_arg = cfg_path.to_str().unwrap();
    assert_exit(&hosprisk(&["generate", "--config", cfg_arg]), 0, "generate");
    assert_exit(&hosprisk(&["run", "--config", cfg_arg, "--models", "logreg"]), 0, "run");

    let report_path = cfg.output_dir.join("report.json");
    let mut report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    report["models"][0]["confusion"] = serde_json::json!({"tp": 77, "fp": 23, "fn": 10, "tn": 90});
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap()).unwrap();

    let out = hosprisk(&["roi", "--report", report_path.to_str().unwrap()]);
    assert_exit(&out, 0, "roi");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("22.9%"), "{stdout}");
}

#[test]
fn invalid_threshold_exits_2() {
    let out = hosprisk(&["run", "--threshold", "1.5"]);
    assert_exit(&out, 2, "threshold out of range");
}
