use std::process::{Command, Output};

use lf_core::harness::{run_experiment, ExperimentConfig, ModelConfig, SchedulerConfig};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Row {
    t: u64,
    observable_name: String,
    value: f64,
    attempts: u64,
    successes: u64,
    wall_ms: f64,
    realization_id: u32,
}

fn lf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lf"))
        .args(args)
        .output()
        .expect("spawn lf")
}

struct Parsed {
    config: ExperimentConfig,
    header: Vec<String>,
    rows: Vec<Row>,
}

fn parse(text: &str) -> Parsed {
    let echo: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| !l.starts_with("lf "))
        .map(|l| format!("{l}\n"))
        .collect();
    let config: ExperimentConfig = toml::from_str(&echo).expect("config echo parses");
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd.deserialize().collect::<Result<Vec<Row>, _>>().expect("rows parse");
    Parsed { config, header, rows }
}

#[test]
fn flat_surface_single_row() {
    let out = lf(&["kpz", "--size", "64", "--p", "1", "--q", "0", "--mcs", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = parse(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(
        p.header,
        ["t", "observable_name", "value", "attempts", "successes", "wall_ms", "realization_id"]
    );
    assert_eq!(p.rows.len(), 1);
    let r = &p.rows[0];
    assert_eq!((r.t, r.attempts, r.successes, r.realization_id), (0, 0, 0, 0));
    assert_eq!(r.observable_name, "w2");
    assert_eq!(r.value, 0.5);
    assert!(r.wall_ms >= 0.0);
}

#[test]
fn size_must_be_power_of_two() {
    let out = lf(&["kpz", "--size", "100"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    let mut lines = err.lines();
    assert!(lines.next().unwrap().contains("power of two"), "{err}");
    assert!(lines.next().unwrap().starts_with("Usage:"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_values_rejected() {
    for args in [
        &["kpz", "--size", "64", "--p", "1.5"][..],
        &["kmc", "--size", "16", "--conc", "1.2"],
        &["kpz", "--size", "64", "--scheduler", "doubletile", "--tile-edge", "6"],
        &["kpz", "--size", "64", "--seed", "0xzz"],
        &["kpz", "--bogus"],
        &["kpz", "--size", "64", "--rng", "mt19937"],
    ] {
        let out = lf(args);
        assert!(!out.status.success(), "{args:?} accepted");
    }
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let out = lf(&[
        "kpz",
        "--size",
        "32",
        "--mcs",
        "12",
        "--seed",
        "0xfedcba9876543210",
        "--scheduler",
        "twolayer",
        "--outer",
        "doubletile",
        "--block-edge",
        "16",
        "--tile-edge",
        "4",
        "--workers",
        "2",
        "--rng",
        "tinymt",
        "--realizations",
        "2",
        "--sample-every",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let p = parse(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(p.config.seed, 0xfedc_ba98_7654_3210);
    assert_eq!(p.config.workers, 2);
    assert!(matches!(p.config.scheduler, SchedulerConfig::TwoLayer { inner_tile_edge: 4, .. }));

    // Re-running the echoed config reproduces every observable.
    let again = run_experiment(&p.config).unwrap();
    let rows: Vec<_> = again
        .series
        .iter()
        .flat_map(|s| s.rows.iter().map(move |r| (s.realization, r.t, r.value, r.attempts, r.successes)))
        .collect();
    let file: Vec<_> = p
        .rows
        .iter()
        .map(|r| (r.realization_id, r.t, r.value, r.attempts, r.successes))
        .collect();
    assert_eq!(rows, file);
    assert_eq!(file.len(), 2 * 4);
    for r in &p.rows {
        assert_eq!(r.attempts, r.t * 32 * 32);
    }
}

#[test]
fn kmc_double_tiling_run() {
    let out = lf(&[
        "kmc",
        "--size",
        "16",
        "--conc",
        "0.325",
        "--eps",
        "1.5",
        "--mcs",
        "20",
        "--scheduler",
        "doubletile",
        "--workers",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = parse(&String::from_utf8(out.stdout).unwrap());
    assert!(matches!(p.config.model, ModelConfig::Kmc { both_active: false, .. }));
    let first = &p.rows[0];
    let last = p.rows.last().unwrap();
    assert_eq!((first.t, last.t), (0, 20));
    assert!(p.rows.iter().all(|r| r.observable_name == "open_bonds_per_particle"));
    assert!(last.value < first.value);
    assert_eq!(last.attempts, 20 * 16 * 16 * 16 / 2);
}

#[test]
fn bench_reports_throughput() {
    let out = lf(&["bench", "--model", "kpz", "--size", "32", "--mcs", "5", "--sweep-workers", "1,2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("workers,"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[3].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn verify_passes() {
    let out = lf(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 7);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
