use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn shocklayer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shocklayer"))
        .args(args)
        .env_remove("SHOCKLAYER_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn chaplygin_closed_form_branch() {
    let tmp = tempfile::tempdir().unwrap();
    let o = shocklayer(&[
        "solve",
        "--theta0",
        "pi/6",
        "--alpha0",
        "0",
        "--gas",
        "chaplygin:3",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(tmp.path());
    assert_eq!(s["closed_form"], Value::Bool(true));
    let wc = s["Wc_const"].as_f64().unwrap();
    assert!((wc - (0.25 - 1.0 / 9.0)).abs() < 1e-15);
    assert_eq!(s["status"], "valid");
}

#[test]
fn solve_writes_stable_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = shocklayer(&[
        "solve",
        "--theta0",
        "pi/6",
        "--alpha0",
        "pi/36",
        "--N",
        "5",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert!(matches!(code(&o), 0 | 2));
    let s = summary(tmp.path());
    assert!(s["metrics"]["quasi_l1"].as_f64().unwrap() < 1e-6);
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["config"]["problem"]["truncation"], 5);

    let fields = std::fs::read_to_string(tmp.path().join("fields.csv")).unwrap();
    let mut lines = fields.lines();
    assert_eq!(lines.next().unwrap(), "phi,f,fdot,h,y,ut,w,w_rho,Wc,valid");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2048);
    let first: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(first.len(), 10);
    // 17 significant digits
    let mantissa = first[1].trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.replace('.', "").len(), 17);

    let coeffs = std::fs::read_to_string(tmp.path().join("coefficients.csv")).unwrap();
    assert_eq!(coeffs.lines().count(), 1 + 6);
}

#[test]
fn default_case_is_valid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = shocklayer(&["solve", "--out", &out_arg(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(tmp.path())["validity"]["valid"], Value::Bool(true));
}

#[test]
fn large_attack_angle_is_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let o = shocklayer(&["solve", "--alpha0", "pi/6", "--out", &out_arg(tmp.path())]);
    assert_eq!(code(&o), 2);
    let s = summary(tmp.path());
    assert_eq!(s["status"], "invalid");
    assert_eq!(s["validity"]["wc_positive"], Value::Bool(false));
    assert!(tmp.path().join("fields.csv").exists());
}

#[test]
fn manifest_round_trip_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    shocklayer(&[
        "solve",
        "--alpha0",
        "pi/24",
        "--N",
        "7",
        "--grid",
        "512",
        "--out",
        &out_arg(&a),
    ]);
    let manifest = a.join("summary.json");
    let o = shocklayer(&[
        "solve",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        &out_arg(&b),
    ]);
    assert_eq!(code(&o), 0);
    for f in ["fields.csv", "coefficients.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(summary(&a)["config"], summary(&b)["config"]);
}

#[test]
fn trajectories_flow_toward_the_leeward_line() {
    let tmp = tempfile::tempdir().unwrap();
    let o = shocklayer(&[
        "trajectory",
        "--phi0",
        "-0.999pi,-3*pi/4",
        "--phi0",
        "-pi/2",
        "--r0",
        "10",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "path,phi,r,x1,x2,x3");
    let mut last: Option<(usize, f64)> = None;
    let mut paths = 0;
    for l in lines {
        let v: Vec<&str> = l.split(',').collect();
        let (k, r): (usize, f64) = (v[0].parse().unwrap(), v[2].parse().unwrap());
        match last {
            Some((pk, pr)) if pk == k => assert!(r > pr),
            _ => paths += 1,
        }
        last = Some((k, r));
    }
    assert_eq!(paths, 3);
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("trajectory.json")).unwrap())
            .unwrap();
    for p in meta.as_array().unwrap() {
        assert_eq!(p["termination"], "singular_window");
    }
}

#[test]
fn usage_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    for args in [
        vec!["trajectory", "--phi0", "-pi/2", "--r0", "0", "--out", &out],
        vec!["trajectory", "--phi0", "-pi/2", "--r0", "-3", "--out", &out],
        vec!["sweep", "--alpha0", "", "--out", &out],
        vec!["validate", "bogus"],
        vec!["solve", "--theta0", "pi/1", "--out", &out],
        vec!["solve", "--gas", "ideal", "--out", &out],
        vec!["solve", "--N", "3", "--out", &out],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(&shocklayer(&args)), 64, "{args:?}");
    }
    assert_eq!(code(&shocklayer(&["--help"])), 0);
}

#[test]
fn sweep_writes_index_and_case_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = shocklayer(&[
        "sweep",
        "--alpha0",
        "pi/36,pi/18",
        "--N",
        "5,6",
        "--grid",
        "256",
        "--jobs",
        "2",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let index: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("index.json")).unwrap())
            .unwrap();
    let cases = index["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 4);
    for c in cases {
        let dir = tmp.path().join(c["dir"].as_str().unwrap());
        assert!(dir.join("summary.json").exists());
        assert!(c["quasi_l1"].as_f64().unwrap() < 1e-5);
    }
}

#[test]
fn validate_studies_report_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    for study in ["oracle", "chaplygin", "error"] {
        let o = shocklayer(&["validate", study, "--out", &out]);
        assert_eq!(
            code(&o),
            0,
            "{study}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
        let r: Value = serde_json::from_str(
            &std::fs::read_to_string(tmp.path().join(format!("{study}.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(r["passed"], Value::Bool(true));
        assert!(!r["checks"].as_array().unwrap().is_empty());
    }
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_shocklayer"))
        .args(["solve", "--N", "5", "--grid", "64"])
        .env("SHOCKLAYER_OUT", &dir)
        .output()
        .unwrap();
    assert!(matches!(code(&o), 0 | 2));
    assert!(dir.join("summary.json").exists());
}
