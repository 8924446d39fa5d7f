use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gtaccess::montecarlo::{parse_probe_csv, parse_q_csv};
use tempfile::TempDir;

const FIXED_PAIR: &str = r#"{"clusters":[
  {"id":1,"n":300,"beta":1.0,"activity":{"kind":"fixed","k":3}},
  {"id":2,"n":200,"beta":0.5,"activity":{"kind":"fixed","k":2}}]}"#;

const RANDOM_PAIR: &str = r#"{"clusters":[
  {"id":1,"n":200,"beta":1.0,"activity":{"kind":"random","p":0.02}},
  {"id":2,"n":400,"beta":0.5,"activity":{"kind":"random","p":0.01}}]}"#;

const SMALL_FIXED: &str = r#"{"clusters":[
  {"id":1,"n":30,"beta":1.0,"activity":{"kind":"fixed","k":2}},
  {"id":2,"n":20,"beta":0.5,"activity":{"kind":"fixed","k":1}}]}"#;

fn gtaccess(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtaccess"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn q_of(out: &Output) -> Vec<f64> {
    let v: serde_json::Value = serde_json::from_str(&stdout(out)).unwrap();
    v["q"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn optimal_q_for_both_activity_models() {
    let dir = TempDir::new().unwrap();
    let fixed = write(&dir, "fixed.json", FIXED_PAIR);
    let out = gtaccess(&[
        "optimal-q",
        "--config",
        s(&fixed),
        "--report-residual",
        "--probes",
        "40",
    ]);
    assert!(out.status.success());
    assert_eq!(q_of(&out), vec![0.25, 0.125]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let tx: Vec<f64> = v["energy"]["transmissions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(tx, vec![10.0, 5.0]);
    assert!((v["residual"]["residual"].as_f64().unwrap() - 2.0 / 7.0).abs() < 1e-12);

    let random = write(&dir, "random.json", RANDOM_PAIR);
    let q = q_of(&gtaccess(&["optimal-q", "--config", s(&random)]));
    assert!((q[0] - 1.0 / 6.0).abs() < 1e-12);
    assert!((q[1] - 1.0 / 12.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        &dir,
        "bad.json",
        r#"{"clusters":[{"id":1,"n":10,"beta":0.0,"activity":{"kind":"fixed","k":1}}]}"#,
    );
    let out = gtaccess(&["optimal-q", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);

    assert_eq!(gtaccess(&["optimal-q"]).status.code(), Some(1));
    assert_eq!(gtaccess(&["no-such-command"]).status.code(), Some(1));

    let missing = dir.path().join("missing.json");
    assert_eq!(
        gtaccess(&["optimal-q", "--config", s(&missing)])
            .status
            .code(),
        Some(2)
    );

    let cfg = write(&dir, "cfg.json", SMALL_FIXED);
    let unsorted = gtaccess(&[
        "sweep-probes",
        "--config",
        s(&cfg),
        "--q",
        "derived",
        "--t-grid",
        "20,10",
        "--trials",
        "10",
    ]);
    assert_eq!(unsorted.status.code(), Some(1));
}

#[test]
fn bound_evaluation_and_inversion() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "fixed.json", FIXED_PAIR);
    let out = gtaccess(&[
        "bound",
        "--config",
        s(&cfg),
        "--q",
        "derived",
        "--kind",
        "union",
        "--probes",
        "200",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let value = v["value"].as_f64().unwrap();
    assert!((value - 0.052_133_671).abs() < 1e-8, "{value}");

    let out = gtaccess(&[
        "bound",
        "--config",
        s(&cfg),
        "--q",
        "derived",
        "--kind",
        "exp",
        "--epsilon",
        "0.1",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["min_T"].as_u64().unwrap() > 0);
}

#[test]
fn matrix_dump_then_decode() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.txt", "4 3\n101\n011\n110\n001\n");
    let out = gtaccess(&["decode", "--matrix", s(&m), "--y", "101"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["estimated_active"], serde_json::json!([0, 3]));
    assert_eq!(v["negative_probe_count"], 1);

    let wrong_len = gtaccess(&["decode", "--matrix", s(&m), "--y", "10"]);
    assert_eq!(wrong_len.status.code(), Some(1));

    let cfg = write(&dir, "cfg.json", SMALL_FIXED);
    let dumped = dir.path().join("dump.txt");
    let out = gtaccess(&[
        "matrix",
        "--config",
        s(&cfg),
        "--q",
        "derived",
        "--probes",
        "70",
        "--out",
        s(&dumped),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&dumped).unwrap();
    assert!(text.starts_with("50 70\n"));
    let y = "0".repeat(70);
    let out = gtaccess(&["decode", "--matrix", s(&dumped), "--y", &y]);
    assert!(out.status.success());
}

#[test]
fn sweep_probes_is_byte_identical_across_runs_and_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "fixed.json", FIXED_PAIR);
    let run = |workers: &str, name: &str| {
        let path = dir.path().join(name);
        let out = gtaccess(&[
            "sweep-probes",
            "--config",
            s(&cfg),
            "--q",
            "derived",
            "--t-grid",
            "10:200:10",
            "--trials",
            "100",
            "--seed",
            "7",
            "--workers",
            workers,
            "--out",
            s(&path),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(path).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("1", "b.csv");
    let c = run("3", "c.csv");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let points = parse_probe_csv(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(points.len(), 20);
    assert_eq!(points[0].probes, 10);
    assert!(points.iter().all(|p| p.estimate.trials == 100));
}

#[test]
fn sweep_q_writes_csv_and_plot() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL_FIXED);
    let svg = dir.path().join("q.svg");
    let out = gtaccess(&[
        "sweep-q",
        "--config",
        s(&cfg),
        "--q-grid",
        "0.1:0.4:0.1",
        "--target",
        "0.5",
        "--trials",
        "200",
        "--t-cap",
        "256",
        "--plot",
        s(&svg),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let points = parse_q_csv(&stdout(&out)).unwrap();
    assert_eq!(points.len(), 4);
    assert!((points[2].base_q - 0.3).abs() < 1e-12);
    assert!(points.iter().all(|p| p.min_probes.is_some()));
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));

    let too_big = gtaccess(&[
        "sweep-q",
        "--config",
        s(&cfg),
        "--q-grid",
        "0.5,3.0",
        "--target",
        "0.5",
        "--trials",
        "10",
    ]);
    assert_eq!(too_big.status.code(), Some(1));
}

#[test]
fn simulate_reports_estimate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL_FIXED);
    let out = gtaccess(&[
        "simulate",
        "--config",
        s(&cfg),
        "--q",
        "base:0.2",
        "--probes",
        "0",
        "--trials",
        "50",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["estimate"]["successes"], 0);
    assert_eq!(v["q"], serde_json::json!([0.2, 0.1]));
}
