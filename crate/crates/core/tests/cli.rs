//! Exit codes and artifacts of the command line front end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oper-spectra"))
        .args(args)
        .args(["--out", out.to_str().unwrap()])
        .output()
        .unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = config(dir.path(), "bad.json", "{\"punctures\": [[0, 0]");
    let out = dir.path().join("out");
    let o = run(&["monodromy", "--config", &bad], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let missing = dir.path().join("missing.json");
    let o = run(&["phi", "--config", missing.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn structurally_invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let short = config(dir.path(), "short.json", r#"{"coefficients": [1, 0, 1]}"#);
    assert_eq!(run(&["abelian", "periods", "--curve", &short], &out).status.code(), Some(2));
    let class = config(dir.path(), "class.json", r#"{"coefficients": [0, -1, 0, 1], "classes": [[1, 0, 0]]}"#);
    assert_eq!(run(&["abelian", "class", "--curve", &class], &out).status.code(), Some(2));
    let deltas = config(dir.path(), "deltas.json", r#"{"punctures": [[0, 0], [1, 0]], "infinity": true, "delta": [0.25]}"#);
    assert_eq!(run(&["monodromy", "--config", &deltas], &out).status.code(), Some(2));
    let rigid = config(dir.path(), "rigid.json", include_str!("../configs/rigid3.json"));
    assert_eq!(run(&["find-real", "--config", &rigid, "--grid", "0", "4"], &out).status.code(), Some(2));
    assert_eq!(run(&["find-real", "--config", &rigid, "--grid", "6", "6"], &out).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_1_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let four = config(dir.path(), "four.json", include_str!("../configs/four_real.json"));
    let out = dir.path().join("out");
    // A generic accessory parameter has no invariant Hermitian form.
    let o = run(&["phi", "--config", &four, "--mu", "0.3", "0.2", "--grid", "4", "4"], &out);
    assert_eq!(o.status.code(), Some(1));
    let report = json(&out.join("error.json"));
    assert_eq!(report["kind"], "NotRealOper");
    assert_eq!(report["status"], 1);
    assert_eq!(json(&out.join("manifest.json"))["status"], 1);
}

#[test]
fn monodromy_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let rigid = config(dir.path(), "rigid.json", include_str!("../configs/rigid3.json"));
    let out = dir.path().join("out");
    let o = run(&["monodromy", "--config", &rigid, "--seed", "5"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["status"], 0);
    assert_eq!(manifest["run"]["seed"], 5);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert_eq!(outputs, ["monodromy.json"]);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let mono = json(&out.join("monodromy.json"));
    assert_eq!(mono["generators"].as_array().unwrap().len(), 2);
}

#[test]
fn abelian_commands_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let curve = config(dir.path(), "curve.json", include_str!("../configs/curve_genus2.json"));
    for (sub, file) in [
        ("periods", "periods.json"),
        ("class", "classes.json"),
        ("hecke", "hecke.csv"),
        ("verify", "abelian_verify.json"),
    ] {
        let out = dir.path().join(sub);
        let o = run(&["abelian", sub, "--curve", &curve], &out);
        assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join(file).exists(), "{sub} did not write {file}");
    }
    let mut rows = csv::Reader::from_path(dir.path().join("hecke").join("hecke.csv")).unwrap();
    let header: Vec<String> = rows.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["class", "s", "x_re", "x_im", "sheet", "f_re", "f_im"]);
    for row in rows.records() {
        let row = row.unwrap();
        let f: (f64, f64) = (row[5].parse().unwrap(), row[6].parse().unwrap());
        assert!((f.0.hypot(f.1) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn find_real_logs_the_scan() {
    let dir = tempfile::tempdir().unwrap();
    let four = config(dir.path(), "four.json", include_str!("../configs/four_real.json"));
    let out = dir.path().join("out");
    let o = run(&["find-real", "--config", &four, "--rect", "0.1", "0.4", "-0.2", "0.2", "--grid", "8", "8"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hits = json(&out.join("hits.json"));
    let mu = &hits["hits"][0]["mu"];
    assert!((mu[0].as_f64().unwrap() - 0.25).abs() < 1e-9 && mu[1].as_f64().unwrap().abs() < 1e-9);
    let log = fs::read_to_string(out.join("scan_log.csv")).unwrap();
    assert!(log.starts_with("mu_re,mu_im,residual\n"));
    assert_eq!(log.lines().count(), 1 + 64);
}
