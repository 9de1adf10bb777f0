//! End-to-end tests of the command-line interface: output schemas, exit
//! codes, and validation behavior.

use std::path::Path;
use std::process::{Command, Output};

fn dmtomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmtomo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn oracle_reports_bell_corners() {
    let out = dmtomo(&["oracle", "--state", "fixture:bell-phi-plus"]);
    let report = stdout_json(&out);
    let rho = &report["rho_true"];
    for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        let re = rho[r][c][0].as_f64().unwrap();
        assert!((re - 0.5).abs() < 1e-12);
    }
    assert!((rho[1][1][0].as_f64().unwrap()).abs() < 1e-12);
    assert!(report["rho_raw"].is_null());
}

#[test]
fn oracle_reports_product_state_diagonal() {
    let out = dmtomo(&["oracle", "--state", "fixture:product-HH"]);
    let report = stdout_json(&out);
    let rho = &report["rho_true"];
    assert!((rho[0][0][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    for k in 1..4 {
        assert!(rho[k][k][0].as_f64().unwrap().abs() < 1e-12);
    }
}

#[test]
fn malformed_state_exits_2_with_json_error() {
    let out = dmtomo(&["oracle", "--state", "{\"kind\":\"nonsense\"}"]);
    assert_eq!(exit_code(&out), 2);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("invalid StateSpec"));
}

#[test]
fn method1_exact_reaches_unit_fidelity() {
    let out = dmtomo(&[
        "method1",
        "--state",
        "fixture:bell-phi-plus",
        "--mode",
        "exact",
        "--g",
        "1.5707963",
        "--eta",
        "0.01",
    ]);
    let report = stdout_json(&out);
    assert!(report["fidelity"].as_f64().unwrap() >= 1.0 - 1e-8);
}

#[test]
fn method2_small_coupling_is_accurate() {
    let out = dmtomo(&[
        "method2",
        "--state",
        "fixture:bell-phi-plus",
        "--g",
        "0.001",
        "--sigma",
        "1",
    ]);
    let report = stdout_json(&out);
    assert!(report["max_abs_element_error"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn zero_eta_in_probability_mode_exits_2() {
    let out = dmtomo(&["method1", "--state", "fixture:bell-phi-plus", "--eta", "0"]);
    assert_eq!(exit_code(&out), 2);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "eta must be nonzero in probability mode");
}

#[test]
fn method2_coupling_above_sigma_exits_2() {
    let out = dmtomo(&["method2", "--state", "fixture:bell-phi-plus", "--g", "2.0"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn bprime_probability_mode_emits_partial_report_with_exit_3() {
    let out = dmtomo(&[
        "method1",
        "--state",
        "fixture:bell-phi-plus",
        "--mode",
        "probability",
        "--basis",
        "bprime",
        "--eta",
        "0.1",
    ]);
    assert_eq!(exit_code(&out), 3);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let omitted = report["omitted"].as_array().unwrap();
    assert_eq!(omitted.len(), 8);
}

#[test]
fn sweep_eta_error_column_is_monotone() {
    let out = dmtomo(&[
        "sweep",
        "--state",
        "fixture:bell-phi-plus",
        "--method",
        "1",
        "--param",
        "eta",
        "--values",
        "0.1,0.01,0.001",
        "--estimator",
        "first-order",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let errs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 3);
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn sweep_g_error_column_is_monotone_for_method2() {
    let out = dmtomo(&[
        "sweep",
        "--state",
        "fixture:bell-phi-plus",
        "--method",
        "2",
        "--param",
        "g",
        "--values",
        "0.004,0.002,0.001",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.starts_with("param_value,fidelity,trace_distance,max_abs_element_error,runtime_ms")
    );
    let errs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn sweep_rejects_single_value_and_unknown_parameter() {
    let out = dmtomo(&[
        "sweep",
        "--state",
        "fixture:bell-phi-plus",
        "--param",
        "eta",
        "--values",
        "0.1",
    ]);
    assert_eq!(exit_code(&out), 2);

    let out = dmtomo(&[
        "sweep",
        "--state",
        "fixture:bell-phi-plus",
        "--param",
        "warp",
        "--values",
        "1,2",
    ]);
    assert_eq!(exit_code(&out), 2);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]
        .as_str()
        .unwrap()
        .contains("unknown sweep parameter"));
}

#[test]
fn state_can_come_from_file_or_inline_json() {
    let dir = std::env::temp_dir().join("dmtomo-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("state.json");
    std::fs::write(&path, r#"{"kind":"fixture","name":"product-DD"}"#).unwrap();

    let via_file = dmtomo(&["oracle", "--state", &format!("@{}", path.display())]);
    let inline = dmtomo(&[
        "oracle",
        "--state",
        r#"{"kind":"fixture","name":"product-DD"}"#,
    ]);
    assert_eq!(stdout_json(&via_file), stdout_json(&inline));

    let rho = stdout_json(&inline);
    // |DD><DD| has every entry 1/4.
    for r in 0..4 {
        for c in 0..4 {
            assert!((rho["rho_true"][r][c][0].as_f64().unwrap() - 0.25).abs() < 1e-12);
        }
    }
}

#[test]
fn sample_report_echoes_parameters() {
    let out = dmtomo(&[
        "sample",
        "--state",
        "fixture:werner(0.7)",
        "--method",
        "1",
        "--shots",
        "20000",
        "--eta",
        "0.1",
        "--seed",
        "11",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["params"]["shots"], 20000);
    assert_eq!(report["params"]["seed"], 11);
    assert_eq!(report["params"]["eta"], 0.1);
    assert_eq!(report["method"], "method1-sampled");
}

#[test]
fn sample_accepts_full_shot_plan_json() {
    let out = dmtomo(&[
        "sample",
        "--state",
        "fixture:bell-phi-plus",
        "--eta",
        "0.1",
        "--plan",
        r#"{"seed":9,"shots":50000,"per_setting":{"m1/post/DD":100000}}"#,
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["params"]["seed"], 9);
    assert_eq!(report["params"]["shots"], 50000);

    let bad = dmtomo(&[
        "sample",
        "--state",
        "fixture:bell-phi-plus",
        "--plan",
        r#"{"seed":9,"shots":0}"#,
    ]);
    assert_eq!(exit_code(&bad), 2);
}

#[test]
fn out_flag_writes_identical_content_to_file() {
    let dir = std::env::temp_dir().join("dmtomo-cli-out");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let stdout_run = dmtomo(&["oracle", "--state", "fixture:bell-psi-minus"]);
    let file_run = dmtomo(&[
        "oracle",
        "--state",
        "fixture:bell-psi-minus",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(file_run.status.success());
    let written = std::fs::read(Path::new(&path)).unwrap();
    assert_eq!(written, stdout_run.stdout);
}
