//! End-to-end runs of the `varfem` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn varfem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varfem"))
        .current_dir(dir)
        .env("NO_COLOR", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_record(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn mesh_then_solve_from_the_mesh_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "mesh.json", r#"{"command":"mesh","domain":{"kind":"unit_square","n":4}}"#);
    let out = varfem(d, &["mesh", "--config", &cfg, "--out", "m"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = read_json(&d.join("m/mesh.json"));
    assert_eq!(mesh["mesh"]["vertices"].as_array().unwrap().len(), 25);
    assert_eq!(mesh["config_hash"].as_str().unwrap().len(), 16);

    let solve = write(
        d,
        "solve.json",
        r#"{"mesh_file":"m/mesh.json","refine":1,"load":{"laplacian_of":"sin_sin"},"dirichlet":0}"#,
    );
    let out = varfem(d, &["solve-laplace", "--config", &solve, "--out", "s"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&d.join("s/report.json"));
    assert_eq!(report["mesh"]["n_vertices"], 81);
    assert!(report["weak_residual"].as_f64().unwrap() <= 1e-10);
    let sol = read_json(&d.join("s/solution.json"));
    assert_eq!(sol["field"]["values"].as_array().unwrap().len(), 81);
}

#[test]
fn incompatible_neumann_data_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "n.json", r#"{"domain":{"kind":"unit_square","n":4},"load":1.0,"flux":0.0}"#);
    let out = varfem(d, &["solve-neumann", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "compatibility");
    assert!((rec["defect"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    assert_eq!(read_json(&d.join("o/error.json"))["error"], "compatibility");
}

#[test]
fn compatible_neumann_data_is_solved() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(
        d,
        "n.json",
        r#"{"domain":{"kind":"unit_square","n":8},"flux":{"normal_derivative_of":"x2_minus_y2"}}"#,
    );
    let out = varfem(d, &["solve-neumann", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read_json(&d.join("o/report.json"))["defect"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn bad_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "p.json", r#"{"command":"solve-plap","p":0.5}"#);
    let out = varfem(d, &["solve-plap", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["field"], "p");

    let out = varfem(d, &["solve-plap", "--p", "1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_keys_only_warn() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "m.json", r#"{"command":"mesh","domain":{"kind":"unit_square","n":2},"colour":"red"}"#);
    let out = varfem(d, &["mesh", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn solve_plap_with_flag_override_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(
        d,
        "p.json",
        r#"{"domain":{"kind":"unit_square","n":6},"datum":"x2_minus_y2","p":4,"seed":3}"#,
    );
    let out = varfem(d, &["solve-plap", "--config", &cfg, "--p", "6", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&d.join("o/report.json"));
    assert_eq!(rep["p"], 6.0);
    assert!(rep["stationarity"].as_f64().unwrap() <= 1e-8);
    assert_eq!(rep["certificate"]["trials"], 100);
    assert_eq!(rep["certificate"]["passed"], true);
}

#[test]
fn verify_punctured_disk() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = varfem(d, &["verify", "counterexample_punctured", "--p", "3", "--out", "v"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_path(d.join("v/counterexample_punctured.csv")).unwrap();
    let headers = rd.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "flux").unwrap();
    let last = rd.records().last().unwrap().unwrap();
    let flux: f64 = last[col].parse().unwrap();
    assert!((flux.abs() - 2.0 * std::f64::consts::PI).abs() <= 0.05 * 2.0 * std::f64::consts::PI);
    let summary = read_json(&d.join("v/counterexample_punctured.json"));
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["experiment"], "counterexample_punctured");

    let out = varfem(d, &["verify", "counterexample_punctured", "--p", "2", "--out", "w"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("p_M(A) = 2"));

    let out = varfem(d, &["verify", "no_such_experiment", "--out", "w"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_on_affine_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(
        d,
        "s.json",
        r#"{"domain":{"kind":"unit_square","n":4},"p_list":[2],"levels":[1,2],"datum":"x","seed":11}"#,
    );
    let out = varfem(d, &["sweep", "--config", &cfg, "--out", "a", "--threads", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = varfem(d, &["sweep", "--config", &cfg, "--out", "b", "--threads", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read(d.join("a/sweep.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/sweep.csv")).unwrap());

    let mut rd = csv::Reader::from_reader(a.as_slice());
    let headers = rd.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for rec in rd.records() {
        let rec = rec.unwrap();
        let energy: f64 = rec[col("energy")].parse().unwrap();
        let alpha: f64 = rec[col("alpha")].parse().unwrap();
        assert!((energy - 1.0).abs() <= 1e-9, "{energy}");
        assert!((alpha - 1.0).abs() <= 0.1, "{alpha}");
        assert_eq!(&rec[col("status")], "ok");
    }

    // same config: overwrite allowed; different seed: refused, file intact
    let out = varfem(d, &["sweep", "--config", &cfg, "--out", "a"]);
    assert_eq!(out.status.code(), Some(0));
    let out = varfem(d, &["sweep", "--config", &cfg, "--out", "a", "--seed", "12"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "artifact_conflict");
    assert_eq!(a, std::fs::read(d.join("a/sweep.csv")).unwrap());
}

#[test]
fn empty_p_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "s.json", r#"{"domain":{"kind":"unit_square","n":4},"p_list":[]}"#);
    let out = varfem(d, &["sweep", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["field"], "p_list");
}

#[test]
fn failed_sweep_cells_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // stationarity cannot get below rounding
    let cfg = write(
        d,
        "s.json",
        r#"{"domain":{"kind":"unit_square","n":4},"p_list":[2,8],"levels":[1],"datum":"x2_minus_y2","tol":1e-30}"#,
    );
    let out = varfem(d, &["sweep", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.join("o/sweep.csv")).unwrap();
    assert!(text.contains("plap_not_converged"), "{text}");
    assert_eq!(text.lines().count(), 3);
}
