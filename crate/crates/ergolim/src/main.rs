//! Command-line runner for the experiment pipelines.
//!
//! ```text
//! ergolim <kind> --config path.toml [--seed N] [--out path.json]
//!                [--threads N] [--csv path.csv]
//! ```
//!
//! Kinds: clt | lln | invariant | mixing | order | assumptions.
//! Exit codes: 0 = all verdicts pass, 2 = a verdict failed,
//! 1 = execution error. `ERGOLIM_THREADS` is the fallback for
//! `--threads`.

use std::path::PathBuf;
use std::process::ExitCode;

use ergolim::harness::{run_experiment_with, ConfigValue, RawConfig};

struct CliArgs {
    kind: String,
    config: PathBuf,
    seed: Option<u64>,
    threads: Option<u64>,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
}

const USAGE: &str = "usage: ergolim <kind> --config path.toml [--seed N] [--out path.json] [--threads N] [--csv path.csv]\n  kinds: clt | lln | invariant | mixing | order | assumptions";

fn parse_args() -> Result<CliArgs, String> {
    let mut args = std::env::args().skip(1);
    let kind = args.next().ok_or_else(|| USAGE.to_string())?;
    if kind == "--help" || kind == "-h" {
        return Err(USAGE.to_string());
    }
    let mut config = None;
    let mut seed = None;
    let mut threads = None;
    let mut out = None;
    let mut csv = None;
    while let Some(flag) = args.next() {
        let mut value = |name: &str| {
            args.next()
                .ok_or_else(|| format!("flag {name} needs a value\n{USAGE}"))
        };
        match flag.as_str() {
            "--config" => config = Some(PathBuf::from(value("--config")?)),
            "--seed" => {
                seed = Some(
                    value("--seed")?
                        .parse::<u64>()
                        .map_err(|e| format!("--seed: {e}"))?,
                )
            }
            "--threads" => {
                threads = Some(
                    value("--threads")?
                        .parse::<u64>()
                        .map_err(|e| format!("--threads: {e}"))?,
                )
            }
            "--out" => out = Some(PathBuf::from(value("--out")?)),
            "--csv" => csv = Some(PathBuf::from(value("--csv")?)),
            other => return Err(format!("unknown flag `{other}`\n{USAGE}")),
        }
    }
    let config = config.ok_or_else(|| format!("--config is required\n{USAGE}"))?;
    if threads.is_none() {
        if let Ok(env) = std::env::var("ERGOLIM_THREADS") {
            threads = Some(
                env.parse::<u64>()
                    .map_err(|e| format!("ERGOLIM_THREADS: {e}"))?,
            );
        }
    }
    Ok(CliArgs {
        kind,
        config,
        seed,
        threads,
        out,
        csv,
    })
}

fn run(args: CliArgs) -> Result<bool, String> {
    let mut cfg = RawConfig::load(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.sections
            .entry("experiment".to_string())
            .or_default()
            .insert("seed".into(), ConfigValue::Int(seed as i64));
    }
    // Threads stay out of the config echo: reports are byte-identical
    // across worker counts.
    let report = run_experiment_with(&cfg, Some(&args.kind), args.threads.map(|t| t as usize))
        .map_err(|e| e.to_string())?;

    for v in &report.verdicts {
        println!(
            "{:32} {}  observed = {:.6e}  ({})",
            v.name,
            if v.pass { "PASS" } else { "FAIL" },
            v.observed,
            v.criterion
        );
    }
    if !report.failures.is_empty() {
        println!(
            "replica failures: {}/{} ({} allowed)",
            report.failures.len(),
            report.replicas,
            (report.replicas as f64 * 0.01).floor() as u64
        );
    }
    println!(
        "overall: {}  [{} steps, {} ms]",
        if report.pass { "PASS" } else { "FAIL" },
        report.timing.steps,
        report.timing.wall_ms
    );

    let out_path = args
        .out
        .or_else(|| cfg.str("experiment", "out").ok().map(PathBuf::from));
    if let Some(path) = out_path {
        report
            .write_json(&path)
            .map_err(|e| format!("cannot write {path:?}: {e}"))?;
        println!("report written to {}", path.display());
    }
    let csv_path = args
        .csv
        .or_else(|| cfg.str("experiment", "csv").ok().map(PathBuf::from));
    if let Some(path) = csv_path {
        report
            .write_csv(&path)
            .map_err(|e| format!("cannot write {path:?}: {e}"))?;
        println!("summary csv written to {}", path.display());
    }
    // QQ data of the replica statistics against the null, for external
    // plotting.
    if let Ok(path) = cfg.str("experiment", "qq_csv") {
        if let ergolim::harness::ExperimentResults::Clt(r) = &report.results {
            let pairs =
                ergolim::stats::qq_data(&r.statistics, r.v2_null).map_err(|e| e.to_string())?;
            let file =
                std::fs::File::create(&path).map_err(|e| format!("cannot create {path}: {e}"))?;
            ergolim::stats::write_qq_csv(file, &pairs).map_err(|e| e.to_string())?;
            println!("qq data written to {path}");
        }
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };
    match run(args) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
