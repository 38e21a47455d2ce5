//! End-to-end checks of the command-line runner: exit codes, report
//! and CSV emission, seed/thread overrides, and the environment
//! fallback for the worker count.

use std::path::PathBuf;
use std::process::Command;

use ergolim::harness::Report;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergolim"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ergolim_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let dir = temp_dir("pass");
    let out = dir.join("report.json");
    let csv = dir.join("table.csv");
    let status = bin()
        .args(["mixing", "--config"])
        .arg(config("mixing_ou.toml"))
        .arg("--out")
        .arg(&out)
        .arg("--csv")
        .arg(&csv)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = Report::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report.pass);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("t,distance"));
    assert!(table.lines().count() > 10);
}

#[test]
fn failing_verdict_exits_two() {
    // The explicit-scheme overflow control is a designed failure.
    let status = bin()
        .args(["assumptions", "--config"])
        .arg(config("moment_double_well_em.toml"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn execution_errors_exit_one() {
    let status = bin()
        .args(["clt", "--config", "/no/such/file.toml"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status2 = bin().args(["clt"]).status().unwrap();
    assert_eq!(status2.code(), Some(1));
    // Kind mismatch between the command line and the config.
    let status3 = bin()
        .args(["lln", "--config"])
        .arg(config("mixing_ou.toml"))
        .status()
        .unwrap();
    assert_eq!(status3.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_thread_settings() {
    let dir = temp_dir("threads");
    let out1 = dir.join("t1.json");
    let out8 = dir.join("t8.json");
    let run = |threads: &str, out: &PathBuf| {
        let status = bin()
            .args(["mixing", "--config"])
            .arg(config("sfde_mixing.toml"))
            .arg("--out")
            .arg(out)
            .env("ERGOLIM_THREADS", threads)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    };
    run("1", &out1);
    run("8", &out8);
    let r1 = Report::from_json(&std::fs::read_to_string(&out1).unwrap()).unwrap();
    let r8 = Report::from_json(&std::fs::read_to_string(&out8).unwrap()).unwrap();
    assert_eq!(r1.canonical_json(), r8.canonical_json());
}

#[test]
fn seed_override_changes_the_draws() {
    let dir = temp_dir("seed");
    let out_a = dir.join("a.json");
    let out_b = dir.join("b.json");
    for (seed, out) in [("1", &out_a), ("2", &out_b)] {
        let status = bin()
            .args(["clt", "--config"])
            .arg(config("sfde_clt.toml"))
            .args(["--seed", seed])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.code() == Some(0) || status.code() == Some(2));
    }
    let a = Report::from_json(&std::fs::read_to_string(&out_a).unwrap()).unwrap();
    let b = Report::from_json(&std::fs::read_to_string(&out_b).unwrap()).unwrap();
    assert_eq!(a.seed, 1);
    assert_eq!(b.seed, 2);
    assert_ne!(a.canonical_json(), b.canonical_json());
}

#[test]
fn all_shipped_configs_parse_and_declare_known_kinds() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg =
            ergolim::harness::RawConfig::load(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
        let kind = cfg.str("experiment", "kind").unwrap();
        assert!(
            ["clt", "lln", "invariant", "mixing", "order", "assumptions"].contains(&kind.as_str()),
            "{path:?} has unknown kind {kind}"
        );
        count += 1;
    }
    assert!(count >= 10, "expected the full config set, found {count}");
}
