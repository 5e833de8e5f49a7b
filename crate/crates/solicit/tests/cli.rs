//! End-to-end runs of the `solicit` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use solicit::cli::{LawDocument, PlanDocument, SimulateDocument, StatsDocument};
use solicit::verify::VerifyReport;

fn solicit(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_solicit"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const GEOMETRIC_POISSON: &str = r#"{
    "law": {"kind": "geometric", "p": 0.5},
    "prior": {"kind": "poisson", "v": 1.0},
    "stats": {"y_max": 30},
    "simulation": {"replicates": 20000, "seed": 42, "chunk_size": 333}
}"#;

#[test]
fn law_csv_for_an_empty_pool() {
    let dir = tempfile::tempdir().unwrap();
    let config =
        r#"{"law": {"kind": "geometric", "p": 0.5}, "prior": {"kind": "poisson", "v": 0.0}}"#;
    let out = stdout(&solicit(dir.path(), config, &["law", "--format", "csv"]));
    assert_eq!(out, "n,prob\n1,1.0\nresidual,0.0\n");
}

#[test]
fn law_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&solicit(dir.path(), GEOMETRIC_POISSON, &["law"]));
    let doc: LawDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.engine, "poisson");
    assert!((doc.probs[0] - (-0.5f64).exp()).abs() < 1e-15);
    assert_eq!(serde_json::to_string_pretty(&doc).unwrap() + "\n", text);
}

#[test]
fn stats_reports_engines_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&solicit(dir.path(), GEOMETRIC_POISSON, &["stats"]));
    let raw: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(raw["engines"]["e_Y"], "geometric");
    assert_eq!(raw["engines"]["var_Y"], "poisson");
    let doc: StatsDocument = serde_json::from_str(&text).unwrap();
    assert!((doc.e_t - 1.491_370_322_943_653).abs() < 1e-12);
    assert!((doc.e_y - 0.609_905_567_948_438_5).abs() < 1e-12);
    assert!((doc.e_m - 1.219_811_135_896_877).abs() < 1e-12);
    assert!(doc.law_y.unwrap().probs.len() == 31);
}

#[test]
fn simulate_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, GEOMETRIC_POISSON).unwrap();
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_solicit"))
            .args(["simulate", "--config"])
            .arg(&path)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        stdout(&out)
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert_eq!(one, run("4"));
    let doc: SimulateDocument = serde_json::from_str(&one).unwrap();
    assert_eq!(doc.report.seed, 42);
    assert_eq!(doc.report.replicates, 20000);
    assert_eq!(doc.report.identity_violations, 0);
    assert_eq!(doc.report.law_t_counts.iter().sum::<u64>(), 20000);
}

#[test]
fn seed_flag_overrides_and_auto_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let a = stdout(&solicit(
        dir.path(),
        GEOMETRIC_POISSON,
        &["simulate", "--seed", "7"],
    ));
    let b = stdout(&solicit(dir.path(), GEOMETRIC_POISSON, &["simulate"]));
    assert_ne!(a, b);
    let doc: SimulateDocument = serde_json::from_str(&a).unwrap();
    assert_eq!(doc.report.seed, 7);
    let auto = stdout(&solicit(
        dir.path(),
        GEOMETRIC_POISSON,
        &["simulate", "--seed", "auto"],
    ));
    let doc: SimulateDocument = serde_json::from_str(&auto).unwrap();
    let replay = stdout(&solicit(
        dir.path(),
        GEOMETRIC_POISSON,
        &["simulate", "--seed", &doc.report.seed.to_string()],
    ));
    assert_eq!(auto, replay);
}

#[test]
fn planning_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "law": {"kind": "geometric", "p": 0.001953125},
        "prior": {"kind": "poisson", "v": 1000.0},
        "pool": {"target": 10.0, "bounds": [0.0, 3000.0]},
        "prob": {"target": 10.0, "bounds": [0.0009765625, 0.00390625]},
        "economics": {"purchase_rate": 0.5, "c0": 2.0, "c1": 0.01, "c2": 0.001,
                      "price_curve": {"kind": "exponential", "a": 0.2, "b": 0.05}},
        "profit": {"v_grid": [0.0, 500.0, 1000.0], "w_grid": [10.0, 20.0, 40.0]}
    }"#;
    let text = stdout(&solicit(dir.path(), config, &["plan-pool"]));
    let doc: PlanDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.method, "bisection");
    assert!(doc.expected_sales >= 10.0 && doc.below.unwrap().value < 10.0);
    let csv = stdout(&solicit(
        dir.path(),
        config,
        &["plan-prob", "--format", "csv"],
    ));
    assert!(csv.starts_with("param,value\n"));
    let csv = stdout(&solicit(
        dir.path(),
        config,
        &["plan-profit", "--format", "csv"],
    ));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "v,w,profit");
    assert_eq!(lines.len(), 10);
    let text = stdout(&solicit(dir.path(), config, &["plan-profit"]));
    let doc: PlanDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.method, "exhaustive");
    assert!(doc.expected_profit.is_some());
}

fn error_of(out: &Output) -> (i32, Value) {
    let code = out.status.code().unwrap();
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    (code, err)
}

#[test]
fn failures_have_distinct_exit_codes_and_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = error_of(&solicit(dir.path(), "{\"law\": 3}", &["stats"]));
    assert_eq!((code, err["error"]["kind"].as_str()), (2, Some("config")));

    let bad_law =
        r#"{"law": {"kind": "geometric", "p": 1.5}, "prior": {"kind": "poisson", "v": 1.0}}"#;
    assert_eq!(error_of(&solicit(dir.path(), bad_law, &["law"])).0, 2);

    let infeasible = r#"{"pool": {"p": 0.5, "target": 100.0, "bounds": [0.0, 10.0]}}"#;
    let (code, err) = error_of(&solicit(dir.path(), infeasible, &["plan-pool"]));
    assert_eq!(
        (code, err["error"]["kind"].as_str()),
        (3, Some("infeasible"))
    );

    let capped = r#"{"law": {"kind": "geometric", "p": 0.001}, "prior": {"kind": "poisson", "v": 1000.0},
                     "policy": {"alpha": 1e-12, "hard_cap": 10}}"#;
    let (code, err) = error_of(&solicit(dir.path(), capped, &["law"]));
    assert_eq!(
        (code, err["error"]["kind"].as_str()),
        (4, Some("numerical"))
    );

    let out = Command::new(env!("CARGO_BIN_EXE_solicit"))
        .args(["stats", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(error_of(&out).0, 5);

    let out = Command::new(env!("CARGO_BIN_EXE_solicit"))
        .args(["frobnicate"])
        .output()
        .unwrap();
    assert_eq!(error_of(&out).0, 2);
}

#[test]
fn verify_default_suite_passes() {
    let out = Command::new(env!("CARGO_BIN_EXE_solicit"))
        .arg("verify")
        .output()
        .unwrap();
    let report: VerifyReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report.passed);
    assert!(report.checks.len() >= 10);
}

#[test]
fn output_flag_writes_the_same_document() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("law.csv");
    let to_file = solicit(
        dir.path(),
        GEOMETRIC_POISSON,
        &[
            "law",
            "--format",
            "csv",
            "--output",
            target.to_str().unwrap(),
        ],
    );
    assert!(stdout(&to_file).is_empty());
    let printed = stdout(&solicit(
        dir.path(),
        GEOMETRIC_POISSON,
        &["law", "--format", "csv"],
    ));
    assert_eq!(std::fs::read_to_string(&target).unwrap(), printed);
}
