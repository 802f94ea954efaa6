use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn folmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_folmi"))
        .args(args)
        .output()
        .expect("spawn folmi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_shipped_examples() {
    for ex in ["example1.json", "example2.json"] {
        let o = folmi(&["validate", s(&fixture(ex))]);
        assert_eq!(o.status.code(), Some(0), "{ex}: {}", stdout(&o));
    }
}

#[test]
fn bad_dimensions_exit_3_with_location() {
    let o = folmi(&["validate", s(&fixture("bad_dims.json"))]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad_dims.json:") && err.contains("plant.b"), "{err}");
}

#[test]
fn missing_config_exits_3() {
    let o = folmi(&["validate", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn synth_writes_a_usable_controller() {
    let dir = tempfile::tempdir().unwrap();
    let o = folmi(&["synth", s(&fixture("example1.json")), "--nc", "1", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("feasible"));
    let ctrl = dir.path().join("example1_controller_nc1.json");
    assert!(ctrl.exists());
    let o = folmi(&["analyze", s(&fixture("example1.json")), "--controller", s(&ctrl)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn synth_dumps_lmi() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("p.lmi");
    let o = folmi(&[
        "synth",
        s(&fixture("example2.json")),
        "--nc",
        "0",
        "--mode",
        "certain",
        "--out",
        s(dir.path()),
        "--dump-lmi",
        s(&dump),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = std::fs::read_to_string(dump).unwrap();
    assert!(text.starts_with("lmi-standard-form 1"));
}

#[test]
fn analyze_table_controller() {
    let o = folmi(&[
        "analyze",
        s(&fixture("example1.json")),
        "--controller",
        s(&fixture("table1_nc1.json")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("stable"));
}

#[test]
fn analyze_open_loop_is_unstable() {
    let o = folmi(&["analyze", s(&fixture("example1.json")), "--controller", "none"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_without_controller_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let o = folmi(&["simulate", s(&fixture("example1.json")), "--controller", "none", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("diverg"), "{}", stdout(&o));
    assert!(dir.path().join("example1_traj_0.csv").exists());
}

#[test]
fn simulate_is_reproducible() {
    let run = |d: &Path| {
        let o = folmi(&[
            "simulate",
            s(&fixture("example2.json")),
            "--controller",
            s(&fixture("table2_nc1.json")),
            "--out",
            s(d),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        std::fs::read(d.join("example2_traj_0.csv")).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let bytes = run(a.path());
    assert_eq!(bytes, run(b.path()));
    let header = String::from_utf8_lossy(&bytes).lines().next().unwrap().to_string();
    assert_eq!(header, "t,x1,x2,xc1,u1,y1,y2");
}

#[test]
fn known_infeasible_fixtures_exit_2() {
    for f in ["unstable_scalar.json", "unstabilizable.json"] {
        let dir = tempfile::tempdir().unwrap();
        let o = folmi(&["synth", s(&fixture(f)), "--out", s(dir.path())]);
        assert_eq!(o.status.code(), Some(2), "{f}: {}", stdout(&o));
        assert!(stdout(&o).contains("infeasible"));
    }
}

#[test]
fn robustness_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("noseed.json");
    let text = std::fs::read_to_string(fixture("example1.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["robustness"].as_object_mut().unwrap().remove("seed");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = folmi(&["robustness", s(&cfg), "--controller", s(&fixture("table1_nc1.json"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn robustness_writes_report_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    let text = std::fs::read_to_string(fixture("example1.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["robustness"]["samples"] = 3.into();
    v["sim"]["h"] = 1e-2.into();
    std::fs::write(&cfg, v.to_string()).unwrap();
    let args = |out: &Path| {
        folmi(&[
            "robustness",
            s(&cfg),
            "--controller",
            s(&fixture("table1_nc2.json")),
            "--seed",
            "9",
            "--out",
            s(out),
        ])
    };
    let o = args(dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = std::fs::read_to_string(dir.path().join("small_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 3 + 1);
    for i in 0..3 {
        assert!(dir.path().join(format!("small_traj_{i}.csv")).exists());
    }
    let again = tempfile::tempdir().unwrap();
    assert_eq!(args(again.path()).status.code(), Some(0));
    assert_eq!(report, std::fs::read_to_string(again.path().join("small_report.csv")).unwrap());
}

#[test]
fn showcase_reports_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = folmi(&["showcase", s(&fixture("example1.json")), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("5 of 5 non-convergent"), "{}", stdout(&o));
}

#[test]
fn controller_shape_mismatch_exits_3() {
    let o = folmi(&[
        "analyze",
        s(&fixture("example1.json")),
        "--controller",
        s(&fixture("table2_nc1.json")),
    ]);
    assert_eq!(o.status.code(), Some(3));
}
