use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qan_core::keyfile;

fn qan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qan"))
        .args(args)
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_str()
        .unwrap()
        .to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn plan_prints_table_and_json() {
    let o = qan(&["plan", "--scenario", &scenario("full_64_users.json")]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("link_loss_db"));
    let json_start = text.find('{').unwrap();
    let v: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    let loss = v["result"]["link_loss_db"].as_f64().unwrap();
    assert!((loss - 26.5).abs() < 0.3);
}

#[test]
fn outputs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = qan(&[
            "sweep",
            "--scenario",
            &scenario("capacity_dual_feeder.json"),
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let x = std::fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(x, std::fs::read(b.join("sweep.csv")).unwrap());
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("# qan-sweep v1\n"));
    // header plus 2 x 5 grid points
    assert_eq!(text.lines().count(), 2 + 10);
}

#[test]
fn single_point_sweep_matches_plan() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "one.json",
        r#"{"scheme": {"kind": "full", "feeder_km": 20, "classical_split": 16, "olt_attenuation_db": 9},
            "sweep": [{"path": "/scheme/feeder_km", "values": [20]}]}"#,
    );
    let sweep = stdout(&qan(&["sweep", "--scenario", &path]));
    let plan = stdout(&qan(&["plan", "--scenario", &path, "--format", "csv"]));
    let last = |s: &str| s.lines().last().unwrap().to_owned();
    // the sweep row leads with the axis value
    assert!(last(&sweep).ends_with(&last(&plan)), "{sweep}\n{plan}");
}

#[test]
fn sweep_json_format() {
    let o = qan(&[
        "sweep",
        "--scenario",
        &scenario("dual_splitter.json"),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn check_mode_and_exit_codes() {
    let o = qan(&[
        "sweep",
        "--check",
        "--scenario",
        &scenario("distance_full.json"),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "ok: 75 sweep point(s)");

    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"scheme": {"kind": "full", "feeder_km": 5, "classical_split": 48}}"#,
    );
    let o = qan(&["plan", "--check", "--scenario", &bad]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("/scheme/classical_split"), "{err}");

    let typo = write(
        dir.path(),
        "typo.json",
        r#"{"scheme": {"kind": "full", "feeder_km": 5, "classical_split": 16}, "protocl": {}}"#,
    );
    assert_eq!(qan(&["plan", "--scenario", &typo]).status.code(), Some(1));
    assert_eq!(
        qan(&["plan", "--scenario", "/no/such/file.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(qan(&["plan"]).status.code(), Some(1));
}

#[test]
fn validate_passes_and_rejects_empty_run() {
    let o = qan(&[
        "validate",
        "--scenario",
        &scenario("validate_low_loss.json"),
        "--pulses",
        "2000000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));

    let o = qan(&[
        "validate",
        "--scenario",
        &scenario("validate_low_loss.json"),
        "--pulses",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn calibrate_reference_table() {
    let o = qan(&["calibrate", "--measurements", &scenario("noise_table.json")]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let preds = v["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 2);
    for p in preds {
        assert!(p["relative_error"].as_f64().unwrap().abs() < 0.05);
    }
    let default = stdout(&qan(&["calibrate"]));
    assert_eq!(default, stdout(&o));
}

#[test]
fn postproc_writes_matching_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = qan(&[
        "postproc",
        "--scenario",
        &scenario("validate_low_loss.json"),
        "--pulses",
        "1000000",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["accounting"]["outcome"], "secret");
    let a = keyfile::read(&out.join("final_sender.key")).unwrap();
    let b = keyfile::read(&out.join("final_receiver.key")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.len() as u64,
        report["accounting"]["final_len"].as_u64().unwrap()
    );
    let sifted = keyfile::read(&out.join("sifted_sender.key")).unwrap();
    assert_eq!(
        sifted.len() as u64,
        report["accounting"]["sifted_len"].as_u64().unwrap()
    );
    for f in ["observables.json", "postproc.json", "sifted_receiver.key"] {
        assert!(out.join(f).exists(), "{f}");
    }
}
