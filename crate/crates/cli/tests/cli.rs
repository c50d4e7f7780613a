use std::fs;
use std::process::Command;

fn vortexlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vortexlab"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn validate_passes() {
    let out = vortexlab().arg("validate").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 7);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let plan = format!(
        r#"{{
  "geometry": {{ "curve": {{ "kind": "circle", "radius": 1.0 }} }},
  "discretization": {{ "n_theta": 16, "n_z": 64, "h": 0.025, "dt": 0.002, "record_every": 5 }},
  "physics": {{ "nu": [0.02, 0.01], "t_end": 0.02, "ic": {{ "kind": "clamped", "modes": [[1, 1.0, 0.0]], "power": 3 }} }},
  "output": {{ "dir": {:?} }}
}}"#,
        out_dir.to_str().unwrap()
    );
    let cfg = dir.path().join("plan.json");
    fs::write(&cfg, plan).unwrap();
    let run = vortexlab().env("VORTEXLAB_THREADS", "0").args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read(out_dir.join("records.csv")).unwrap();
    let report = vortexlab().arg("report").arg("--dir").arg(&out_dir).output().unwrap();
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("6 plots"));
    assert_eq!(fs::read(out_dir.join("records.csv")).unwrap(), csv);
}

#[test]
fn bad_config_reports_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.json");
    fs::write(&cfg, r#"{"geometry": {"curve": {"kind": "circle", "radius": 1.0}}, "physics": {}}"#).unwrap();
    let out = vortexlab().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    let missing = vortexlab().args(["report", "--dir"]).arg(dir.path().join("nope")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
