//! Experiment orchestration: configuration parsing, deterministic
//! replica-parallel execution, the experiment pipelines (lln, clt,
//! invariant, mixing, order, assumptions), and JSON/CSV report
//! emission.

pub mod config;
pub mod pipelines;
pub mod replica;
pub mod report;

pub use config::{ConfigError, ConfigValue, RawConfig};
pub use pipelines::{run_experiment, run_experiment_with, HarnessError};
pub use replica::{replica_map, resolve_threads};
pub use report::{ExperimentResults, Report, Timing, Verdict};

#[cfg(test)]
mod tests {
    use super::*;

    fn flagship_config(threads: u64, replicas: u64) -> RawConfig {
        RawConfig::parse(&format!(
            r#"
[experiment]
kind = "clt"
scheme = "bem"
tau = 0.05
lambda = 0.2
replicas = {replicas}
seed = 42
threads = {threads}
indep_factor = 20

[model]
name = "ou"
theta = 1.0
sigma = 1.0
d = 1

[functional]
name = "coordinate"
i = 0
"#
        ))
        .unwrap()
    }

    #[test]
    fn clt_pipeline_runs_and_reports() {
        let cfg = flagship_config(1, 64);
        let report = run_experiment(&cfg, None).unwrap();
        match &report.results {
            ExperimentResults::Clt(r) => {
                // τ = 0.05, λ = 0.2 → k = ⌈0.05^{−1.4}⌉ = 67.
                assert_eq!(r.k, 67);
                assert_eq!(r.statistics.len(), 64);
                assert_eq!(r.v2_source, "oracle");
                assert_eq!(r.mu_f, 0.0);
                assert_eq!(r.variance_estimates.len(), 3);
            }
            other => panic!("wrong results variant: {other:?}"),
        }
        assert!(report.verdicts.iter().any(|v| v.name == "ks_p"));
        assert!(report.failures.is_empty());
    }

    #[test]
    fn reports_are_byte_identical_across_parallelism() {
        let cfg = flagship_config(0, 32);
        let r1 = run_experiment_with(&cfg, None, Some(1)).unwrap();
        let r8 = run_experiment_with(&cfg, None, Some(8)).unwrap();
        assert_eq!(r1.canonical_json(), r8.canonical_json());
    }

    #[test]
    fn distinct_replicas_use_distinct_streams() {
        let cfg = flagship_config(2, 8);
        let report = run_experiment(&cfg, None).unwrap();
        let ExperimentResults::Clt(r) = &report.results else {
            unreachable!()
        };
        for w in r.statistics.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn unknown_scheme_is_a_config_error_naming_the_field() {
        let mut text = String::from(
            "[experiment]\nkind = \"clt\"\nscheme = \"rk4\"\ntau = 0.05\nlambda = 0.2\n",
        );
        text.push_str("[model]\nname = \"ou\"\ntheta = 1.0\nsigma = 1.0\n");
        let cfg = RawConfig::parse(&text).unwrap();
        let err = run_experiment(&cfg, None).unwrap_err();
        match err {
            HarnessError::Config(e) => {
                assert_eq!(e.path, "experiment.scheme");
                assert!(e.msg.contains("rk4"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn cli_kind_must_match_declared_kind() {
        let cfg = flagship_config(1, 8);
        let err = run_experiment(&cfg, Some("lln")).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
    }

    #[test]
    fn report_json_roundtrips_through_serde() {
        let report = run_experiment(&flagship_config(1, 16), None).unwrap();
        let back = Report::from_json(&report.to_json()).unwrap();
        assert_eq!(report, back);
    }
}
