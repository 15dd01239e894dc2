use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tsch_model::schedule::three_node_example;
use tsch_model::topology::Topology;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tsch-model"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr)
}

fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a generated 19-node network and returns (schedule, topology).
fn network(dir: &TempDir, algorithm: &str) -> (PathBuf, PathBuf) {
    let (sp, tp) = (dir.path().join("s.json"), dir.path().join("t.json"));
    let o = run(&["schedule", algorithm, "--rings", "2", "--out", s(&sp), "--topology-out", s(&tp)]);
    assert!(o.status.success(), "{}", text(&o));
    (sp, tp)
}

#[test]
fn validate_example_schedule() {
    let dir = TempDir::new().unwrap();
    let sp = write(&dir, "s.json", &three_node_example().to_json());
    let tp = write(&dir, "t.json", &Topology::line(3).to_json());
    let o = run(&["validate", "--schedule", s(&sp), "--topology", s(&tp)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
}

#[test]
fn validate_reports_invariant_by_name() {
    let dir = TempDir::new().unwrap();
    let sp = write(
        &dir,
        "s.json",
        r#"{"slotframe_length": 2, "nodes": [
            {"id": 0, "tx": [], "rx": [{"slot": 1, "peer": 1, "channel": 11}]},
            {"id": 1, "tx": [{"slot": 1, "peer": 0, "channel": 11}], "rx": [{"slot": 1, "peer": 0, "channel": 11}]}]}"#,
    );
    let tp = write(&dir, "t.json", &Topology::line(2).to_json());
    let o = run(&["validate", "--schedule", s(&sp), "--topology", s(&tp)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("tx-rx-exclusive"), "{}", text(&o));
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let sp = write(&dir, "s.json", "{\"slotframe_length\": 3, \"nodes\": [");
    let tp = write(&dir, "t.json", &Topology::line(3).to_json());
    let o = run(&["validate", "--schedule", s(&sp), "--topology", s(&tp)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["validate", "--schedule", "/nonexistent.json", "--topology", s(&tp)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schedule_summaries() {
    for (alg, len) in [("sbd", 19), ("ta-sc", 31), ("ta-mc", 19)] {
        let o = run(&["schedule", alg, "--rings", "2"]);
        assert!(o.status.success());
        let summary = String::from_utf8_lossy(&o.stderr);
        assert!(summary.contains(&format!("S={len}\n")), "{alg}: {summary}");
        if alg == "sbd" {
            assert!(summary.contains("root RX slots 6 "), "{summary}");
        }
        // The schedule itself goes to stdout and is loadable.
        tsch_model::schedule::Schedule::from_json(&String::from_utf8_lossy(&o.stdout)).unwrap();
    }
}

#[test]
fn schedule_trace_file() {
    let dir = TempDir::new().unwrap();
    let tp = write(&dir, "t.json", &Topology::line(2).to_json());
    let trace = dir.path().join("trace.txt");
    let o = run(&["schedule", "ta-sc", "--topology", s(&tp), "--trace", s(&trace)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(trace).unwrap(), "Track 0 1 1\nAssignRX 1 0 1\nTrack 1 0 2\n");
}

#[test]
fn analyze_single_node_reproduces_published_values() {
    for (flag, value, want) in [
        ("--poisson", "0.2", 0.95),
        ("--poisson", "0.3", 0.67),
        ("--poisson", "0.5", 0.40),
        ("--bernoulli", "0.2", 0.96),
    ] {
        let o = run(&["analyze", "--slots", "5", "--tx", "0", flag, value, "--queue", "10"]);
        assert!(o.status.success(), "{}", text(&o));
        let out = String::from_utf8_lossy(&o.stdout);
        let line = out.lines().find(|l| l.starts_with("paccept,")).unwrap();
        let p: f64 = line["paccept,".len()..].parse().unwrap();
        assert!((p - want).abs() <= 0.005, "{flag} {value}: {p}");
    }
}

#[test]
fn analyze_network_rows() {
    let dir = TempDir::new().unwrap();
    let (sp, tp) = network(&dir, "sbd");
    let out = dir.path().join("a.csv");
    let o = run(&["analyze", "--schedule", s(&sp), "--topology", s(&tp), "--interval", "5", "--out", s(&out)]);
    assert!(o.status.success(), "{}", text(&o));
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["node", "paccept", "delay_slots", "delay_s", "pdr", "e2e_delay_slots", "e2e_delay_s", "throughput"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 20);
    assert_eq!((&rows[0][4], &rows[0][5]), ("1.0", "0.0"));
    let outer = &rows[19];
    assert_eq!(&outer[0], "outer");
    assert!(outer[4].parse::<f64>().unwrap() > 0.99);
}

#[test]
fn analyze_rejects_missing_rate() {
    let dir = TempDir::new().unwrap();
    let (sp, tp) = network(&dir, "sbd");
    let o = run(&["analyze", "--schedule", s(&sp), "--topology", s(&tp)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_rows_and_zero_rate() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "sweep.json",
        r#"{"parameter": "rate", "grid": {"min": 0, "max": 0.3, "count": 4},
            "queue_limits": [6, 16],
            "networks": [{"rings": 2, "schedules": ["sbd", "ta-sc", "ta-mc"]}]}"#,
    );
    let out = dir.path().join("sweep.csv");
    let o = run(&["sweep", s(&spec), "--out", s(&out)]);
    assert!(o.status.success(), "{}", text(&o));
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["schedule", "nodes", "variant", "K", "rate", "metric", "value"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 2 * 4 * 5);
    for row in &rows {
        if &row[5] == "throughput" && row[4].parse::<f64>().unwrap() == 0.0 {
            assert_eq!(row[6].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn sweep_rejects_bad_spec() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "bad.json", r#"{"parameter": "rate", "grid": {"min": 0, "max": 0.3, "count": 1}, "queue_limits": [6], "networks": [{"rings": 2, "schedules": ["sbd"]}]}"#);
    assert_eq!(run(&["sweep", s(&spec)]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_writes_runs() {
    let dir = TempDir::new().unwrap();
    let (sp, tp) = network(&dir, "sbd");
    let args = |out: &Path, runs: &Path| {
        vec![
            "simulate".to_string(),
            "--schedule".into(),
            s(&sp).into(),
            "--topology".into(),
            s(&tp).into(),
            "--interval".into(),
            "2".into(),
            "--warmup".into(),
            "60".into(),
            "--runs".into(),
            "5".into(),
            "--seed".into(),
            "3".into(),
            "--compare".into(),
            "--out".into(),
            s(out).into(),
            "--runs-out".into(),
            s(runs).into(),
        ]
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let (ra, rb) = (dir.path().join("ra.csv"), dir.path().join("rb.csv"));
    assert!(bin().args(args(&a, &ra)).status().unwrap().success());
    assert!(bin().args(args(&b, &rb)).status().unwrap().success());
    let agg = std::fs::read_to_string(&a).unwrap();
    assert_eq!(agg, std::fs::read_to_string(&b).unwrap());
    assert_eq!(std::fs::read_to_string(&ra).unwrap(), std::fs::read_to_string(&rb).unwrap());

    let lines: Vec<&str> = agg.lines().collect();
    assert_eq!(lines[0], "metric,mean,ci_low,ci_high,model,inside_ci");
    assert_eq!(lines.len(), 1 + 3);
    assert!(lines[1..].iter().all(|l| l.ends_with(",yes") || l.ends_with(",no")));
    let per_run = std::fs::read_to_string(&ra).unwrap();
    for metric in ["pdr", "delay_slots", "throughput"] {
        let n = per_run.lines().filter(|l| l.split(',').nth(1) == Some(metric)).count();
        assert_eq!(n, 5, "{metric}");
    }
}

#[test]
fn simulate_single_node() {
    let o = run(&["simulate", "--slots", "5", "--tx", "0", "--poisson", "0.1", "--queue", "10", "--compare"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("acceptance,")));
}
