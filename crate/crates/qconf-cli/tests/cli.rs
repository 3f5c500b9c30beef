//! End-to-end checks of the `qconf` binary: worked examples, exit codes,
//! output determinism, and the fixed CSV header.

use std::process::{Command, Output};

fn qconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qconf"))
        .args(args)
        .env_remove("QCONF_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn jfun_coh_noneq_degree_one_row() {
    let out = qconf(&["jfun", "--variant", "coh", "--n", "2", "--z", "1", "--trunc", "1"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["schema"], "qconf/1");
    let mut seen = 0;
    for row in doc["rows"].as_array().unwrap() {
        if row["qdeg"] == 1 && row["logdeg"] == 0 {
            let want = match row["basis"].as_u64().unwrap() {
                0 => "1/1",
                1 => "-3/1",
                2 => "6/1",
                _ => unreachable!(),
            };
            assert_eq!(row["value"], want);
            seen += 1;
        }
    }
    assert_eq!(seen, 3);
}

#[test]
fn jfun_kth_noneq_log_coefficient() {
    let out = qconf(&["jfun", "--variant", "kth", "--n", "1", "--trunc", "0"]);
    let doc = stdout_json(&out);
    let hit = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["basis"] == 1 && r["qdeg"] == 0 && r["logdeg"] == 1)
        .expect("row present");
    assert_eq!(hit["value"], "-1/1");
}

#[test]
fn jfun_rejects_base_outside_unit_interval() {
    let out = qconf(&["jfun", "--variant", "kth", "--n", "1", "--trunc", "2", "--q", "1.5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_flag_exits_two() {
    let out = qconf(&["jfun", "--no-such-flag"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_kth_noneq_is_exact() {
    let out = qconf(&["verify", "--equation", "kth", "--variant", "noneq", "--n", "2", "--trunc", "6"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["residual_max"], "0");
    assert_eq!(doc["pass"], true);
    assert!(doc["rows"].as_array().unwrap().is_empty());
}

#[test]
fn verify_coh_eq_is_exact() {
    let out = qconf(&["verify", "--equation", "coh", "--variant", "eq", "--n", "1", "--trunc", "5"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["pass"], true);
}

#[test]
fn verify_corruption_is_located() {
    let out = qconf(&[
        "verify", "--equation", "kth", "--variant", "noneq", "--n", "1", "--trunc", "4",
        "--corrupt",
    ]);
    assert_eq!(code(&out), 4);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["residual_max"], "nonzero");
    let rows = doc["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert_eq!(rows[0]["qdeg"], 4);
}

#[test]
fn theta_shift_relation_holds_tightly() {
    let out = qconf(&["specfun", "theta", "--q", "0.3", "--at", "0.7", "--check-qde"]);
    let doc = stdout_json(&out);
    assert!(doc["qde_residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(doc["qde_pass"], true);
}

#[test]
fn ell_log_limit_errors_decrease() {
    let out = qconf(&["specfun", "ell", "--q", "0.5", "--at", "2.0", "--log-limit", "--steps", "12"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["decreasing"], true);
    let errs: Vec<f64> = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["error"].as_f64().unwrap())
        .collect();
    assert_eq!(errs.len(), 12);
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn ell_on_theta_zero_exits_three() {
    let out = qconf(&["specfun", "ell", "--q", "0.5", "--at", "-0.5"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn echar_scaling_relation_holds() {
    let out = qconf(&["specfun", "echar", "--q", "0.4", "--lambda", "3/2", "--at", "1.7"]);
    let doc = stdout_json(&out);
    assert!(doc["scaling_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn equation_level_confluence_matches_operator() {
    let out = qconf(&["confluence", "--level", "equation", "--variant", "noneq", "--n", "2"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["confluent"], true);
    // top coefficient of the limit operator is z^3 = 1
    let top = &doc["target"][3]["coeffs"][0];
    assert!(top["re"].as_str().unwrap().starts_with("1.0000"));
}

#[test]
fn solution_level_confluence_eq_fixture_passes() {
    let out = qconf(&[
        "confluence", "--level", "solution", "--variant", "eq", "--n", "1", "--lambda", "0,1/3",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["passed"], true);
    let hit = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["basis"] == 0 && r["qdeg"] == 1)
        .expect("row present");
    assert!(hit["target"]["re"].as_str().unwrap().starts_with("1.5000"));
}

#[test]
fn resonant_weights_exit_three() {
    let out = qconf(&[
        "confluence", "--level", "solution", "--variant", "eq", "--n", "1", "--lambda", "0,1",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn sauloy_divergent_family_exits_four() {
    let out = qconf(&["sauloy-check", "--family", "divergent"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn sauloy_jordan_family_exits_three() {
    let out = qconf(&["sauloy-check", "--family", "noneq", "--n", "1"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn sauloy_eq_family_passes() {
    let out = qconf(&["sauloy-check", "--family", "eq", "--n", "1", "--lambda", "0,1/3"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["nonresonant"], true);
    assert_eq!(doc["regular_singular"], true);
}

#[test]
fn csv_header_is_fixed() {
    for args in [
        vec!["jfun", "--variant", "coh", "--n", "1", "--trunc", "1", "--format", "csv"],
        vec!["specfun", "ell", "--q", "0.5", "--at", "2.0", "--log-limit", "--format", "csv"],
        vec!["confluence", "--level", "equation", "--variant", "noneq", "--n", "1", "--format", "csv"],
    ] {
        let out = qconf(&args);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().next().unwrap(), "basis,qdeg,logdeg,t,value,target,error");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "confluence", "--level", "solution", "--variant", "noneq", "--n", "2", "--trunc", "2",
    ];
    let a = qconf(&args);
    let b = qconf(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn output_file_and_precision_override() {
    let path = std::env::temp_dir().join(format!("qconf-cli-test-{}.json", std::process::id()));
    let out = qconf(&[
        "specfun", "theta", "--q", "0.3", "--at", "0.7", "--bits", "64", "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(doc["rows"][0]["value"]["bits"], 64);
    std::fs::remove_file(&path).ok();
}
