use std::path::Path;
use std::process::{Command, Output};

fn fairsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairsim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FAIRSIM_CONFIG")
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path, name: &str, seed: &str) -> Output {
    fairsim(
        &[
            "synth",
            "--pattern",
            "stop_and_go",
            "--ucv",
            "2",
            "--dcv",
            "2",
            "--seconds",
            "4",
            "--seed",
            seed,
            "--out",
            name,
        ],
        dir,
    )
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert!(synth(dir.path(), "a.csv", "7").status.success());
    assert!(synth(dir.path(), "b.csv", "7").status.success());
    assert!(synth(dir.path(), "c.csv", "8").status.success());
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn run_writes_reports_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert!(synth(dir.path(), "s.csv", "3").status.success());
    let out = fairsim(
        &[
            "run",
            "--scenario",
            "s.csv",
            "--algo",
            "fair,sa_max",
            "--out",
            "out",
            "--seed",
            "5",
            "--set",
            "beta_unallocated=4",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out_dir = dir.path().join("out");
    for f in [
        "utilization.csv",
        "fps_ucv.csv",
        "manifest.json",
        "summary.json",
    ] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["overrides"][0], "beta_unallocated=4");
    assert_eq!(runs[0]["config"]["beta_unallocated"], 4);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIR") && stdout.contains("SA_MAX"));
}

#[test]
fn run_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(synth(dir.path(), "s.csv", "1").status.success());
    for out in ["o1", "o2"] {
        let o = fairsim(
            &[
                "run",
                "--scenario",
                "s.csv",
                "--algo",
                "fair,da_min",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("o1"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(
            std::fs::read(dir.path().join("o1").join(&n)).unwrap(),
            std::fs::read(dir.path().join("o2").join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"period_T": 0, "fps0": -1}"#,
    )
    .unwrap();
    let out = fairsim(&["validate", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("period_T") && err.contains("fps0"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn config_path_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"period_T": 0}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fairsim"))
        .args(["validate"])
        .current_dir(dir.path())
        .env("FAIRSIM_CONFIG", "bad.json")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let ok = fairsim(&["validate"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn unknown_override_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairsim(&["validate", "--set", "no.such.key=1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairsim(
        &["run", "--scenario", "missing.csv", "--out", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn sweep_varies_one_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairsim(
        &[
            "sweep",
            "--loads",
            "2:2",
            "--seeds",
            "1",
            "--vary",
            "default_weights.uplink.w1=1,20",
            "--algo",
            "fair",
            "--seconds",
            "2",
            "--out",
            "sw",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.path().join("sw").join("q_u.csv")).unwrap();
    // header plus one row per weight value
    assert_eq!(table.lines().count(), 3);
}
