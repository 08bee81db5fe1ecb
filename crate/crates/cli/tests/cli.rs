use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qnoise(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnoise"))
        .args(args)
        .env("QNOISE_OUT", out)
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn matrix_writes_example_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = qnoise(&["matrix", "--n", "3", "--alpha", "1", "--xi", "1"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows, vec![vec![2.0, 1.0, 0.5], vec![1.0, 2.0, 1.0], vec![0.5, 1.0, 2.0]]);
    let summary = json_file(&dir.path().join("eigen_summary.json"));
    assert!(summary["min_eigenvalue"].as_f64().unwrap() > 0.0);
    let manifest = json_file(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "matrix");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(manifest["wall_time_s"].as_f64().is_some());
}

#[test]
fn argument_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = qnoise(&["matrix", "--alpha", "1", "--xi", "1"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("Usage"));
    let zero = qnoise(&["matrix", "--n", "3", "--alpha", "0", "--xi", "1"], dir.path());
    assert_eq!(zero.status.code(), Some(2));
    let grid = qnoise(&["sweep", "--alpha", "0.5", "--n-min", "16", "--n-max", "16"], dir.path());
    assert_eq!(grid.status.code(), Some(2));
    let state = qnoise(&["qfi", "--state", "w", "--n", "3", "--alpha", "1", "--xi", "1"], dir.path());
    assert_eq!(state.status.code(), Some(2));
}

#[test]
fn psd_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = qnoise(&["matrix", "--n", "10", "--alpha", "0.5", "--xi", "1", "--diag-scale", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unsupported_exponent_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["qfi", "--state", "ghz", "--n", "2", "--alpha", "1", "--xi", "1", "--p", "1.5", "--pulses", "fid"];
    assert_eq!(qnoise(&args, dir.path()).status.code(), Some(4));
}

#[test]
fn qfi_short_time_rates() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--n", "3", "--alpha", "1", "--xi", "1", "--gamma", "1"];
    let ghz = qnoise(&[&["qfi", "--state", "ghz"][..], &base].concat(), dir.path());
    let v: Value = serde_json::from_str(&stdout(&ghz)).unwrap();
    assert!((v["f_q"].as_f64().unwrap() - 1.375).abs() < 1e-12);
    let prod = qnoise(&[&["qfi", "--state", "plus-product"][..], &base].concat(), dir.path());
    let v: Value = serde_json::from_str(&stdout(&prod)).unwrap();
    assert!((v["f_q"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert_eq!(v["method"], "ShortTimeRate");
}

#[test]
fn qfi_from_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let rho = qnoise::dynamics::PureState::ghz(3).unwrap().density_matrix();
    let path = dir.path().join("ghz.txt");
    std::fs::write(&path, qnoise::io::state_to_text(rho.matrix())).unwrap();
    let spec = format!("file:{}", path.display());
    let o = qnoise(&["qfi", "--state", &spec, "--n", "3", "--alpha", "1", "--xi", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["f_q"].as_f64().unwrap() - 1.375).abs() < 1e-9);
}

#[test]
fn qfi_shot_time_matches_numerical_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["qfi", "--state", "ghz", "--n", "4", "--alpha", "0.5", "--xi", "1", "--gamma", "1", "--p", "1", "--pulses", "0.5"];
    let o = qnoise(&args, dir.path());
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let y0 = v["y0"].as_f64().unwrap();
    assert!((y0 - 0.4371087328993578).abs() < 1e-6);
    let rate = v["rate"].as_f64().unwrap();
    let t_opt = v["t_opt"].as_f64().unwrap();
    assert!((v["numerical"]["rate"].as_f64().unwrap() - rate).abs() < 1e-9 * rate);
    assert!((v["numerical"]["t_opt"].as_f64().unwrap() - t_opt).abs() < 1e-6 * t_opt);
    // y0 = ξ t_opt^{1+p} C ΣA₁ with ΣA₁ = 8 + 2(3 + 2/√2 + 1/√3)
    let total = 8.0 + 2.0 * (3.0 + 2.0 / 2f64.sqrt() + 1.0 / 3f64.sqrt());
    let c = v["coefficient"].as_f64().unwrap();
    assert!((t_opt * t_opt * c * total - y0).abs() < 1e-12);
}

#[test]
fn sweep_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = qnoise(&["sweep", "--alpha", "0.5", "--p", "0", "--n-min", "16", "--n-max", "4096"], dir.path());
    assert!(o.status.success());
    let fit = json_file(&dir.path().join("fit.json"));
    assert_eq!(fit["pass"], true);
    assert!((fit["exponent"].as_f64().unwrap() - 0.5).abs() < 0.05);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("N,R,t_opt,A_N\n"));
    assert_eq!(csv.lines().count(), 26);

    let bounded = tempfile::tempdir().unwrap();
    let o = qnoise(&["sweep", "--alpha", "2", "--p", "0", "--n-min", "16", "--n-max", "4096"], bounded.path());
    assert!(o.status.success());
    let fit = json_file(&bounded.path().join("fit.json"));
    assert_eq!(fit["theoretical"], "BOUNDED");
    assert_eq!(fit["pass"], true);
}

#[test]
fn verify_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let one = qnoise(&["--threads", "1", "verify", "--suite", "mc-white", "--seed", "7"], dir.path());
    let three = qnoise(&["--threads", "3", "verify", "--suite", "mc-white", "--seed", "7"], dir.path());
    assert!(one.status.success());
    assert_eq!(stdout(&one), stdout(&three));
    let manifest = json_file(&dir.path().join("manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["threads"], 3);
}

#[test]
fn verify_lindblad_and_filter_pass() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["lindblad", "filter"] {
        let o = qnoise(&["verify", "--suite", suite, "--seed", "7"], dir.path());
        assert!(o.status.success(), "{}", stdout(&o));
        assert!(dir.path().join(format!("verify-{suite}.json")).exists());
    }
}

#[test]
fn unknown_suite_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qnoise(&["verify", "--suite", "nope"], dir.path()).status.code(), Some(2));
}
