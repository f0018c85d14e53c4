use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_holonomy-lab");

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_field(text: &str, column: &str) -> f64 {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == column).unwrap();
    row[i].parse().unwrap()
}

#[test]
fn walker_holonomy() {
    let o = run(&[
        "holonomy", "--model", "walker", "--l", "1", "--delta", "0.3", "--cycles", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!((csv_field(&out, "dg_1").abs() - 4.0 * 0.3_f64.sin()).abs() < 1e-9);
    assert!(csv_field(&out, "residual") <= 1e-9);
}

#[test]
fn disk_with_no_windings_is_trivial() {
    let o = run(&[
        "holonomy",
        "--model",
        "disk",
        "--r",
        "1",
        "--windings",
        "0",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["total"][0].as_f64(), Some(0.0));
}

#[test]
fn shipped_fixtures_stay_within_the_cross_check_bound() {
    for name in ["walker.json", "disk.json"] {
        let o = run(&[
            "holonomy",
            "--system",
            fixture(name).to_str().unwrap(),
            "--tol",
            "1e-10",
        ]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
        assert!(csv_field(&stdout(&o), "residual") <= 1e-9, "{name}");
    }
}

#[test]
fn broken_reset_is_an_input_error() {
    let o = run(&[
        "holonomy",
        "--system",
        fixture("broken_reset.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("validation failed"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_arguments_are_input_errors() {
    let walker = fixture("walker.json");
    for args in [
        vec!["holonomy"],
        vec![
            "holonomy",
            "--model",
            "walker",
            "--system",
            walker.to_str().unwrap(),
        ],
        vec!["holonomy", "--model", "walker", "--delta", "2"],
        vec!["holonomy", "--model", "walker", "--tol", "0"],
        vec!["holonomy", "--system", "/nonexistent/system.json"],
        vec!["sweep", "--model", "disk"],
        vec!["sweep", "--model", "walker", "--schedule", "100,10"],
        vec!["frobnicate"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn inconsistent_potential_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad_potential.json");
    std::fs::write(
        &path,
        r#"{
            "schema_version": 1,
            "name": "bad-potential",
            "fiber": ["x"],
            "modes": [{"id": "m", "chart": [{"name": "q", "period": 6.283185307179586}],
                       "connection": [["1"]], "potential": ["2*q"]}],
            "loop": {"segments": [{"mode": "m", "interval": [0, 1], "curve": ["2*pi*t"]}]}
        }"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let o = run(&["holonomy", "--system", p]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = run(&["holonomy", "--system", p, "--method", "quadrature"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn lift_agrees_with_holonomy() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lift.csv");
    let log = dir.path().join("crossings.json");
    let o = run(&[
        "lift",
        "--model",
        "walker",
        "--start",
        "0.5",
        "--crossings",
        log.to_str().unwrap(),
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let blocks: Vec<&str> = text.trim_end().split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    let last_row = blocks[1].lines().last().unwrap();
    let g_end: f64 = last_row.split(',').nth(2).unwrap().parse().unwrap();
    let h = run(&["holonomy", "--model", "walker"]);
    let dg = csv_field(&stdout(&h), "dg_1");
    assert!((g_end - 0.5 - dg).abs() < 1e-12);
    let crossings: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&log).unwrap()).unwrap();
    assert_eq!(crossings.as_array().unwrap().len(), 2);
}

#[test]
fn sweep_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "--model",
        "walker",
        "--k",
        "0.5",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("sweep.summary.json")).unwrap(),
    )
    .unwrap();
    assert!((summary["limit"][0].as_f64().unwrap().abs() - 2.0).abs() < 1e-8);
    assert!((summary["order"].as_f64().unwrap() - 2.0).abs() < 0.1);

    let o = run(&["sweep", "--model", "walker", "--schedule", "10"]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));

    let o = run(&["sweep", "--model", "walker", "--k", "0"]);
    assert_eq!(code(&o), 0);
    let rows: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows, vec![0.0; 3]);
}

#[test]
fn sweep_over_a_definition_file() {
    let o = run(&[
        "sweep",
        "--system",
        fixture("walker.json").to_str().unwrap(),
        "--sweep-param",
        "delta",
        "--schedule",
        "10,100,1000",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["limit"][0].as_f64().unwrap().abs() - 2.0).abs() < 1e-8);
}

#[test]
fn check_reports_each_fixture() {
    let o = run(&[
        "check",
        "--system",
        fixture("walker.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o)
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("true")));

    let o = run(&[
        "check",
        "--system",
        fixture("nonexact_demo.json").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 2);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["passed"], false);
    let exact = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["check"] == "exactness")
        .unwrap();
    assert_eq!(exact["passed"], false);
    assert!((exact["value"].as_f64().unwrap() - 2.0).abs() < 1e-6);

    let o = run(&[
        "check",
        "--system",
        fixture("broken_reset.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("diagram,") && l.contains(",false,")));
}

fn outputs_twice(args: &[&str], dir: &Path) -> (Vec<u8>, Vec<u8>) {
    let mut files = Vec::new();
    for k in 0..2 {
        let path = dir.join(format!("out{k}"));
        let mut full: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap().to_owned();
        full.extend(["-o", &p]);
        let o = run(&full);
        assert!(code(&o) == 0 || code(&o) == 2, "{args:?}");
        files.push(std::fs::read(&path).unwrap());
    }
    (files.remove(0), files.remove(0))
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let walker = fixture("walker.json");
    let w = walker.to_str().unwrap();
    for args in [
        vec!["holonomy", "--system", w],
        vec!["lift", "--system", w, "--samples", "33"],
        vec!["sweep", "--model", "walker", "--format", "json"],
        vec!["check", "--system", w, "--seed", "9"],
    ] {
        let (a, b) = outputs_twice(&args, dir.path());
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn thread_cap_does_not_change_output() {
    let one = Command::new(BIN)
        .args(["sweep", "--model", "walker"])
        .env("HOLONOMY_LAB_THREADS", "1")
        .output()
        .unwrap();
    let many = Command::new(BIN)
        .args(["sweep", "--model", "walker"])
        .env("HOLONOMY_LAB_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, many.stdout);
    let bad = Command::new(BIN)
        .args(["sweep", "--model", "walker"])
        .env("HOLONOMY_LAB_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}
