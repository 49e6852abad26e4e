//! End-to-end tests of the `cfsem` binary: exit codes, output shape,
//! determinism, and model-file round-tripping.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use cfsem_cli::model_file::{self, ModelFile};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cfsem"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run_query(model: &str, query_json: &str) -> Output {
    let mut child = bin()
        .arg("query")
        .arg(fixture(model))
        .arg("-")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(query_json.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

#[test]
fn fixtures_roundtrip_through_serialization() {
    for name in [
        "m1.json",
        "m2.json",
        "m3.json",
        "m4.json",
        "m2_observational.json",
    ] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let parsed: ModelFile = serde_json::from_str(&text).unwrap();
        let re = serde_json::to_string(&parsed).unwrap();
        let reparsed: ModelFile = serde_json::from_str(&re).unwrap();
        assert_eq!(parsed, reparsed, "{name} does not round-trip");
        // and the reserialized form still builds the same engine inputs
        let a = model_file::parse(&text).unwrap();
        let b = model_file::parse(&re).unwrap();
        assert_eq!(a.moments.mean(), b.moments.mean());
        assert_eq!(a.moments.cov(), b.moments.cov());
    }
}

#[test]
fn validate_reports_implied_moments() {
    let out = bin().arg("validate").arg(fixture("m2.json")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("3 vertices"));
    assert!(text.contains("Y: mean 0.0000000000000000e0 variance 3.5000000000000000e0"));
}

#[test]
fn validate_rejects_bad_models_with_exit_2() {
    let out = bin().arg("validate").arg(fixture("bad_cycle.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CycleError"));

    let out = bin().arg("validate").arg(fixture("bad_psd.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NotPositiveSemidefinite"));
}

#[test]
fn validate_rejects_unknown_keys() {
    let dir = std::env::temp_dir();
    let path = dir.join("cfsem_unknown_keys.json");
    std::fs::write(
        &path,
        r#"{"mode":"structural","variables":["X"],"edges":[],"error_cov":[],"surprise":1}"#,
    )
    .unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ParseError"));
}

#[test]
fn query_intervention_matches_fixture_numbers() {
    let out = run_query("m2.json", r#"{"x":"X","y":"Y","x0":1.0}"#);
    let v = stdout_json(&out);
    assert_eq!(v["y_mean"].as_f64().unwrap(), 0.5);
    assert_eq!(v["y_var"].as_f64().unwrap(), 2.0);
    assert_eq!(v["route"]["kind"], "structural");
    assert_eq!(v["query_echo"]["x0"].as_f64().unwrap(), 1.0);
}

#[test]
fn query_point_evidence_matches_fixture_numbers() {
    let out = run_query(
        "m2.json",
        r#"{"x":"X","y":"Y","x0":0.0,"evidence":{"point":{"X":1.0}}}"#,
    );
    let v = stdout_json(&out);
    assert_eq!(v["y_mean"].as_f64().unwrap(), 0.5);
    assert_eq!(v["y_var"].as_f64().unwrap(), 1.5);
}

#[test]
fn query_optimal_plan_matches_fixture_numbers() {
    let out = run_query("m2.json", r#"{"x":"X","y":"Y","optimize_over":["Z"],"x0":0.0}"#);
    let v = stdout_json(&out);
    assert_eq!(v["plan"]["a"][0].as_f64().unwrap(), -2.0);
    assert_eq!(v["y_var"].as_f64().unwrap(), 1.0);
    assert_eq!(v["residual_cross_cov"][0][0].as_f64().unwrap(), 0.0);
}

#[test]
fn query_box_evidence_accepts_infinite_bounds() {
    let out = run_query(
        "m1.json",
        r#"{"x":"X","y":"Y","x0":0.0,"evidence":{"box":{"X":[0.0,"inf"]}}}"#,
    );
    let v = stdout_json(&out);
    assert!((v["y_mean"].as_f64().unwrap()).abs() < 1e-9);
    assert!((v["y_var"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn query_ranking_lists_scores_and_skips() {
    let out = run_query(
        "m2.json",
        r#"{"x":"X","y":"Y","rank":[["Z"],[],["Y"]]}"#,
    );
    let v = stdout_json(&out);
    let ranking = v["ranking"].as_array().unwrap();
    assert_eq!(ranking[0]["covariates"][0], "Z");
    assert_eq!(ranking[0]["score"].as_f64().unwrap(), 1.0);
    assert_eq!(ranking[2]["skipped"], "PlanCovariateIsDescendant");
}

#[test]
fn query_identify_reports_route() {
    let out = run_query("m2_observational.json", r#"{"x":"X","y":"Y","identify":true}"#);
    let v = stdout_json(&out);
    assert_eq!(v["route"]["kind"], "backdoor");
    assert_eq!(v["route"]["adjustment"][0], "Z");
    assert_eq!(v["route"]["tau"].as_f64().unwrap(), 0.5);
}

#[test]
fn unidentified_pair_exits_3() {
    let dir = std::env::temp_dir();
    let path = dir.join("cfsem_unidentified.json");
    std::fs::write(
        &path,
        r#"{
            "mode": "observational",
            "variables": ["Z", "X", "Y"],
            "edges": [
                {"from": "Z", "to": "X"},
                {"from": "Z", "to": "Y"},
                {"from": "X", "to": "Y"}
            ],
            "covariance": {"order": ["X", "Y"], "data": [2.0, 2.0, 2.0, 3.5]}
        }"#,
    )
    .unwrap();
    let mut child = bin()
        .arg("query")
        .arg(&path)
        .arg("-")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(br#"{"x":"X","y":"Y","x0":1.0}"#)
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Unidentified"));
}

#[test]
fn malformed_query_exits_2() {
    let out = run_query("m2.json", r#"{"x":"X","y":"Y"}"#);
    assert_eq!(out.status.code(), Some(2));
    let out = run_query("m2.json", r#"{"x":"X","y":"Y","x0":1.0,"plan":{"x0":0,"w":[],"a":[]}}"#);
    assert_eq!(out.status.code(), Some(2));
    let out = run_query("m2.json", r#"{"x":"Q","y":"Y","x0":1.0}"#);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_comparison_passes_and_is_deterministic() {
    let run = || {
        bin()
            .arg("oracle")
            .arg(fixture("m2.json"))
            .arg("-")
            .arg("--draws")
            .arg("200000")
            .arg("--seed")
            .arg("99")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .and_then(|mut c| {
                c.stdin
                    .as_mut()
                    .unwrap()
                    .write_all(br#"{"x":"X","y":"Y","x0":1.0}"#)?;
                c.wait_with_output()
            })
            .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout, "same seed must give identical output");
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn oracle_tiny_box_exits_5() {
    let mut child = bin()
        .arg("oracle")
        .arg(fixture("m1.json"))
        .arg("-")
        .arg("--draws")
        .arg("10000")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(br#"{"x":"X","y":"Y","x0":0.0,"evidence":{"box":{"X":[4.5,"inf"]}}}"#)
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RejectionBudgetExceeded"));
}

#[test]
fn numbers_are_emitted_at_full_double_precision() {
    // 1/3 is not representable; the output must re-parse to the exact double
    let out = run_query(
        "m2.json",
        r#"{"x":"X","y":"Y","x0":0.3333333333333333}"#,
    );
    let v = stdout_json(&out);
    let y_mean = v["y_mean"].as_f64().unwrap();
    assert_eq!(y_mean, 0.5 * 0.3333333333333333f64);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("e-1") || text.contains("e0"), "scientific notation expected");
}
