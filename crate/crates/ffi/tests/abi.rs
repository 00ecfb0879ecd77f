use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use qan_ffi::*;

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn last_error() -> String {
    let p = qan_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(json: &str) -> *mut QanScenario {
    let c = CString::new(json).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { qan_scenario_from_json(c.as_ptr(), &mut s) },
        QanStatus::Ok
    );
    assert!(!s.is_null());
    s
}

fn take(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { qan_string_free(p) };
    s
}

const FULL_64: &str = r#"{"scheme": {"kind": "full", "feeder_km": 5, "drop_km": 1,
    "classical_split": 64, "olt_attenuation_db": 5}}"#;

#[test]
fn plan_matches_core() {
    let s = load(FULL_64);
    let mut sum = QanPlanSummary::default();
    assert_eq!(unsafe { qan_plan(s, &mut sum) }, QanStatus::Ok);
    let core = qan_core::scenario::plan(&qan_core::scenario::Scenario::from_json(FULL_64).unwrap())
        .unwrap();
    assert_eq!(sum.link_loss_db, core.result.link_loss_db);
    assert_eq!(sum.r_bps, core.result.key.r_bps);
    assert!(sum.feasible);
    assert!((sum.link_loss_db - 26.5).abs() < 0.05);

    let mut loss = 0.0;
    let mut rate = 0.0;
    assert_eq!(unsafe { qan_link_loss_db(s, &mut loss) }, QanStatus::Ok);
    assert_eq!(unsafe { qan_key_rate_bps(s, &mut rate) }, QanStatus::Ok);
    assert_eq!(loss, sum.link_loss_db);
    assert_eq!(rate, sum.r_bps);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { qan_plan_json(s, &mut out) }, QanStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(
        v["result"]["link_loss_db"].as_f64().unwrap(),
        sum.link_loss_db
    );
    unsafe { qan_scenario_free(s) };
}

#[test]
fn set_number_updates_and_rolls_back() {
    let s = load(FULL_64);
    let mut before = 0.0;
    unsafe { qan_link_loss_db(s, &mut before) };
    let path = CString::new("/scheme/feeder_km").unwrap();
    assert_eq!(
        unsafe { qan_scenario_set_number(s, path.as_ptr(), 15.0) },
        QanStatus::Ok
    );
    let mut after = 0.0;
    unsafe { qan_link_loss_db(s, &mut after) };
    assert!(after > before);

    let split = CString::new("/scheme/classical_split").unwrap();
    assert_eq!(
        unsafe { qan_scenario_set_number(s, split.as_ptr(), 48.0) },
        QanStatus::InvalidConfig
    );
    assert!(last_error().contains("classical_split"), "{}", last_error());
    let mut same = 0.0;
    unsafe { qan_link_loss_db(s, &mut same) };
    assert_eq!(same, after);
    unsafe { qan_scenario_free(s) };
}

#[test]
fn sweep_csv_is_versioned() {
    let s = load(
        r#"{"scheme": {"kind": "full", "feeder_km": 5, "drop_km": 1, "classical_split": 16},
            "sweep": [{"path": "/scheme/feeder_km", "values": [1, 2, 3]}]}"#,
    );
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { qan_sweep_csv(s, &mut out) }, QanStatus::Ok);
    let csv = take(out);
    assert!(csv.starts_with("# qan-sweep v1"));
    assert_eq!(csv.lines().count(), 2 + 3);
    unsafe { qan_scenario_free(s) };
}

#[test]
fn error_codes() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { qan_scenario_from_json(ptr::null(), &mut s) },
        QanStatus::NullPointer
    );
    assert!(last_error().contains("json"));

    let bad = CString::new(r#"{"scheme": {"kind": "full", "feeder_km": -1}}"#).unwrap();
    assert_eq!(
        unsafe { qan_scenario_from_json(bad.as_ptr(), &mut s) },
        QanStatus::InvalidConfig
    );
    assert!(s.is_null());

    let garbage = CString::new("{").unwrap();
    assert_eq!(
        unsafe { qan_scenario_from_json(garbage.as_ptr(), &mut s) },
        QanStatus::InvalidConfig
    );

    let utf = [0xffu8, 0];
    assert_eq!(
        unsafe { qan_scenario_from_json(utf.as_ptr().cast(), &mut s) },
        QanStatus::InvalidUtf8
    );

    let missing = CString::new("/nonexistent/scenario.json").unwrap();
    assert_eq!(
        unsafe { qan_scenario_load(missing.as_ptr(), &mut s) },
        QanStatus::Io
    );

    let mut sum = QanPlanSummary::default();
    assert_eq!(
        unsafe { qan_plan(ptr::null(), &mut sum) },
        QanStatus::NullPointer
    );
    let h = load(FULL_64);
    assert_eq!(
        unsafe { qan_plan(h, ptr::null_mut()) },
        QanStatus::NullPointer
    );
    assert_eq!(
        unsafe { qan_link_loss_db(h, ptr::null_mut()) },
        QanStatus::NullPointer
    );
    unsafe {
        qan_scenario_free(h);
        qan_scenario_free(ptr::null_mut());
        qan_string_free(ptr::null_mut());
    }
}

#[test]
fn load_from_file() {
    let path = CString::new(scenarios_dir().join("full_64_users.json").to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { qan_scenario_load(path.as_ptr(), &mut s) },
        QanStatus::Ok
    );
    let mut rate = 0.0;
    assert_eq!(unsafe { qan_key_rate_bps(s, &mut rate) }, QanStatus::Ok);
    assert!(rate > 1000.0);
    unsafe { qan_scenario_free(s) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(qan_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/qan.h"))
            .unwrap();
    for name in [
        "qan_last_error",
        "qan_version",
        "qan_scenario_from_json",
        "qan_scenario_load",
        "qan_scenario_free",
        "qan_scenario_set_number",
        "qan_plan",
        "qan_link_loss_db",
        "qan_key_rate_bps",
        "qan_plan_json",
        "qan_sweep_csv",
        "qan_string_free",
        "QAN_STATUS_INVALID_CONFIG",
        "typedef struct QanScenario QanScenario",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

// Compiles tests/smoke.c against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // test binary lives in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libqan_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin)
        .arg(scenarios_dir().join("full_64_users.json"))
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "{stdout}{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout.contains("feasible=1"), "{stdout}");
    assert!(stdout.contains("bad split -> 3"), "{stdout}");
}
