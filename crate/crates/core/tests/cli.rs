use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use numinv_core::runner::{Report, Status};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn numinv(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_numinv"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_report(out: &Path) -> (String, Report) {
    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    let report = Report::from_json(&text).unwrap();
    (text, report)
}

#[test]
fn bundled_scenarios_pass() {
    for (sub, file) in [
        ("static", "counterexamples.json"),
        ("choice", "choice_smoke.json"),
        ("decompose", "decompose_smoke.json"),
        ("market", "market_smoke.json"),
        ("market", "random_time_smoke.json"),
        ("mc", "mc_smoke.json"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let path = scenario(file);
        let o = numinv(&[sub, path.to_str().unwrap()], dir.path());
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{sub} {file}:\n{stdout}\n{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let (_, report) = read_report(dir.path());
        assert!(report.passed);
        assert!(!report.checks.is_empty());
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        for c in &report.checks {
            assert_eq!(c.status, Status::Pass, "{}", c.name);
            assert!(summary.contains(&c.name), "summary misses {}", c.name);
        }
        assert_eq!(summary, stdout);
    }
}

#[test]
fn reports_are_reproducible_and_round_trip() {
    let path = scenario("decompose_smoke.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(numinv(
        &["decompose", path.to_str().unwrap(), "--seed", "7"],
        a.path()
    )
    .status
    .success());
    assert!(numinv(
        &[
            "decompose",
            path.to_str().unwrap(),
            "--seed",
            "7",
            "--parallel"
        ],
        b.path()
    )
    .status
    .success());
    let (text_a, report) = read_report(a.path());
    let (text_b, _) = read_report(b.path());
    assert_eq!(text_a, text_b);
    assert_eq!(report.seed, 7);
    assert_eq!(report.to_json().unwrap(), text_a);
}

#[test]
fn doob_table_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("mc_smoke.json");
    assert!(numinv(&["mc", path.to_str().unwrap()], dir.path())
        .status
        .success());
    let csv = std::fs::read_to_string(dir.path().join("tables").join("doob.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("gamma,empirical,target,se"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn tighter_tolerances_fail_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("mc_smoke.json");
    let o = numinv(
        &["mc", path.to_str().unwrap(), "--tol-scale", "1e-6"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let (_, report) = read_report(dir.path());
    assert!(!report.passed);
    assert!(report.checks.iter().any(|c| c.status == Status::Fail));
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"version": 1, "tree": {"nodes": [{"parent": null}, {"parent": 0, "prob": 0.5}, {"parent": 0, "prob": 0.4}]},
            "optional_measure": [1.0, 0.0, 0.0],
            "checks": [{"kind": "verify_pair"}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = numinv(&["decompose", bad.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!out.join("report.json").exists());

    let path = scenario("counterexamples.json");
    let o = numinv(&["mc", path.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let o = numinv(&["all", missing.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
}
