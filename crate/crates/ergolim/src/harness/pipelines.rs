//! The experiment pipelines: resolve a parsed configuration into a
//! model/scheme/functional triple, run the requested experiment with
//! deterministic replica parallelism, and assemble the report.

use std::fmt;
use std::time::Instant;

use crate::assumptions::{
    check_contraction, check_moment_bound, check_strong_order, OrderReference, OrderSubject,
};
use crate::error::SimError;
use crate::estimators::{
    check_condition, clt_params, clt_statistic, collect_f_series, rate_fit_from_mse, time_average,
    variance_batch_means, variance_plugin, variance_replica,
};
use crate::functionals::{builtin_functional, TestFunctional};
use crate::measures::{oracles, wasserstein2_1d, EmpiricalMeasure};
use crate::models::{builtin_model, ModelError, ModelKind, ModelSpec, ParamValue, Params};
use crate::rng::{NoiseStream, PURPOSE_INIT, PURPOSE_PATH};
use crate::schemes::{
    step, NewtonConfig, PathState, SchemeKind, SegmentState, StateValue, StepSize,
};
use crate::stats::ks_test;

use super::config::{ConfigError, ConfigValue, RawConfig};
use super::replica::replica_map;
use super::report::{
    AssumptionsResults, CltResults, ExperimentResults, InvariantLevel, InvariantResults,
    LlnResults, MixingResults, OrderResults, ReplicaFailure, Report, Timing, Verdict,
    SCHEMA_VERSION,
};

/// Replica id reserved for the independent long trajectory that
/// estimates μ(f) and v² when no closed form exists.
const INDEPENDENT_REPLICA: u64 = u64::MAX / 2;

#[derive(Debug)]
pub enum HarnessError {
    Config(ConfigError),
    Model(ModelError),
    Sim(SimError),
    Io(std::io::Error),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "{e}"),
            HarnessError::Model(e) => write!(f, "{e}"),
            HarnessError::Sim(e) => write!(f, "{e}"),
            HarnessError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}
impl From<ModelError> for HarnessError {
    fn from(e: ModelError) -> Self {
        HarnessError::Model(e)
    }
}
impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        HarnessError::Sim(e)
    }
}
impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e)
    }
}

fn cfg_err(path: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(ConfigError {
        line: None,
        path: path.into(),
        msg: msg.into(),
    })
}

/// Resolved experiment context shared by all pipelines.
struct Experiment {
    spec: ModelSpec,
    scheme: SchemeKind,
    functional: TestFunctional,
    newton: NewtonConfig,
    seed: u64,
    threads: usize,
    replicas: u64,
    /// (θ, σ, d) when the model is the linear mean-reverting builtin.
    ou: Option<(f64, f64, usize)>,
    /// (a, b, σ) when the model is the linear delay builtin.
    delay: Option<(f64, f64, f64)>,
}

fn build_model(cfg: &RawConfig) -> Result<ModelSpec, HarnessError> {
    let name = cfg.str("model", "name")?;
    let mut params = Params::new();
    if let Some(table) = cfg.sections.get("model") {
        for (key, value) in table {
            if key == "name" {
                continue;
            }
            let pv = match value {
                ConfigValue::Int(v) => ParamValue::Num(*v as f64),
                ConfigValue::Float(v) => ParamValue::Num(*v),
                ConfigValue::Str(s) => ParamValue::Text(s.clone()),
                other => {
                    return Err(cfg_err(
                        &format!("model.{key}"),
                        format!("model parameters must be scalars, got {other}"),
                    ))
                }
            };
            params.0.insert(key.clone(), pv);
        }
    }
    Ok(builtin_model(&name, &params)?)
}

/// Scheme-aware ergodic limit of a builtin functional on the linear
/// model, and the exact limits of the delay head functional.
fn oracle_mu(exp: &Experiment, tau: f64) -> Option<f64> {
    if let Some((theta, sigma, d)) = exp.ou {
        return match exp.functional.name.as_str() {
            "coordinate" | "holder_clip" => Some(0.0),
            "norm_sq" => oracles::scheme_ou_stationary_variance(exp.scheme, theta, sigma, tau)
                .map(|v| v * d as f64),
            _ => None,
        };
    }
    if exp.delay.is_some() {
        return match exp.functional.name.as_str() {
            "segment_head" | "coordinate" | "segment_mean" => Some(0.0),
            _ => None,
        };
    }
    None
}

/// Asymptotic variance of the time-average fluctuations in closed
/// form, where available (the limit the theory predicts).
fn oracle_v2(exp: &Experiment) -> Option<f64> {
    if let Some((theta, sigma, _)) = exp.ou {
        return match exp.functional.name.as_str() {
            "coordinate" => Some(oracles::ou_asymptotic_variance_coordinate(theta, sigma)),
            "norm_sq" => Some(oracles::ou_asymptotic_variance_square(theta, sigma)),
            _ => None,
        };
    }
    if let Some((a, b, sigma)) = exp.delay {
        if matches!(exp.functional.name.as_str(), "segment_head" | "coordinate") {
            return oracles::linear_delay_asymptotic_variance(a, b, sigma).ok();
        }
    }
    None
}

/// Initial state policy: a stationary draw when the model has an exact
/// sampler (per-replica, from the init stream), the zero vector or
/// the declared initial segment otherwise.
fn replica_initial(exp: &Experiment, tau: f64, replica: u64, stationary: bool) -> PathState {
    let path_rng = NoiseStream::new(exp.seed, replica, PURPOSE_PATH);
    if stationary {
        if let (Some((theta, sigma, d)), ModelKind::Sode(_)) = (exp.ou, &exp.spec.kind) {
            if let Some(v) = oracles::scheme_ou_stationary_variance(exp.scheme, theta, sigma, tau) {
                let init = NoiseStream::new(exp.seed, replica, PURPOSE_INIT);
                let x: Vec<f64> = (0..d)
                    .map(|c| v.sqrt() * init.normal(0, c as u64))
                    .collect();
                return PathState::vector(x, path_rng);
            }
        }
    }
    crate::measures::default_initial_state(&exp.spec, path_rng)
}

fn resolve_experiment(cfg: &RawConfig) -> Result<Experiment, HarnessError> {
    let spec = build_model(cfg)?;
    let scheme_name = cfg.str("experiment", "scheme")?;
    let scheme = SchemeKind::parse(&scheme_name).ok_or_else(|| {
        cfg_err(
            "experiment.scheme",
            format!("unknown scheme `{scheme_name}`"),
        )
    })?;
    if scheme.compatible_family() != spec.kind.family() {
        return Err(cfg_err(
            "experiment.scheme",
            format!(
                "scheme `{scheme_name}` discretizes `{}` models, but the model family is `{}`",
                scheme.compatible_family(),
                spec.kind.family()
            ),
        ));
    }
    let f_name = cfg.str_or("functional", "name", "coordinate")?;
    let index = if cfg.has("functional", "i") {
        Some(cfg.u64("functional", "i")? as usize)
    } else {
        None
    };
    let gamma_param = if cfg.has("functional", "holder_gamma") {
        Some(cfg.f64("functional", "holder_gamma")?)
    } else {
        None
    };
    let mut functional = builtin_functional(&f_name, index, gamma_param)
        .map_err(|e| cfg_err("functional.name", e.to_string()))?;
    if cfg.has("functional", "p") {
        functional.p = cfg.f64("functional", "p")?;
        if functional.p < 1.0 {
            return Err(cfg_err("functional.p", "growth exponent must be ≥ 1"));
        }
    }
    if cfg.has("functional", "gamma") {
        functional.gamma = cfg.f64("functional", "gamma")?;
        if !(functional.gamma > 0.0 && functional.gamma <= 1.0) {
            return Err(cfg_err(
                "functional.gamma",
                "Hölder exponent must lie in (0,1]",
            ));
        }
    }
    let newton = NewtonConfig {
        abs_tol: cfg.f64_or("newton", "abs_tol", 1e-12)?,
        max_iter: cfg.u64_or("newton", "max_iter", 50)? as u32,
        damping: cfg.f64_or("newton", "damping", 1.0)?,
    };
    newton
        .validate()
        .map_err(|e| cfg_err("newton", e.to_string()))?;
    let ou = if spec.name == "ou" {
        Some((
            cfg.f64("model", "theta")?,
            cfg.f64("model", "sigma")?,
            cfg.u64_or("model", "d", 1)? as usize,
        ))
    } else {
        None
    };
    let delay = if spec.name == "linear_delay" {
        Some((
            cfg.f64("model", "a")?,
            cfg.f64("model", "b")?,
            cfg.f64("model", "sigma")?,
        ))
    } else {
        None
    };
    Ok(Experiment {
        spec,
        scheme,
        functional,
        newton,
        seed: cfg.u64_or("experiment", "seed", 0)?,
        threads: cfg.u64_or("experiment", "threads", 0)? as usize,
        replicas: cfg.u64_or("experiment", "replicas", 1)?,
        ou,
        delay,
    })
}

fn step_size(exp: &Experiment, tau: f64) -> Result<StepSize, HarnessError> {
    let h = match &exp.spec.kind {
        ModelKind::Spde(m) => m.spatial_h(),
        _ => 0.0,
    };
    Ok(StepSize::new(h, tau, exp.spec.meta.alpha)?)
}

/// Run the experiment described by `cfg`. `cli_kind`, when given,
/// selects the pipeline and must agree with any kind declared in the
/// config.
pub fn run_experiment(cfg: &RawConfig, cli_kind: Option<&str>) -> Result<Report, HarnessError> {
    run_experiment_with(cfg, cli_kind, None)
}

/// [`run_experiment`] with an out-of-band worker-thread override
/// (command line or environment), which must not disturb the report's
/// configuration echo: results are independent of the thread count by
/// construction, so reports stay byte-identical across overrides.
pub fn run_experiment_with(
    cfg: &RawConfig,
    cli_kind: Option<&str>,
    thread_override: Option<usize>,
) -> Result<Report, HarnessError> {
    let declared = if cfg.has("experiment", "kind") {
        Some(cfg.str("experiment", "kind")?)
    } else {
        None
    };
    let kind = match (cli_kind, declared.as_deref()) {
        (Some(k), Some(d)) if k != d => {
            return Err(cfg_err(
                "experiment.kind",
                format!("config declares `{d}` but the command line asked for `{k}`"),
            ))
        }
        (Some(k), _) => k.to_string(),
        (None, Some(d)) => d.to_string(),
        (None, None) => return Err(cfg_err("experiment.kind", "missing required field")),
    };
    let mut exp = resolve_experiment(cfg)?;
    if let Some(threads) = thread_override {
        exp.threads = threads;
    }
    let start = Instant::now();
    let (results, verdicts, failures, steps) = match kind.as_str() {
        "clt" => run_clt(cfg, &exp)?,
        "lln" => run_lln(cfg, &exp)?,
        "invariant" => run_invariant(cfg, &exp)?,
        "mixing" => run_mixing(cfg, &exp)?,
        "order" => run_order(cfg, &exp)?,
        "assumptions" => run_assumptions(cfg, &exp)?,
        other => {
            return Err(cfg_err(
                "experiment.kind",
                format!(
                    "unknown kind `{other}` (clt | lln | invariant | mixing | order | assumptions)"
                ),
            ))
        }
    };
    let pass = Report::compute_pass(&verdicts, failures.len(), exp.replicas);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        config: cfg.echo(),
        seed: exp.seed,
        replicas: exp.replicas,
        results,
        verdicts,
        failures,
        pass,
        timing: Timing {
            wall_ms: start.elapsed().as_millis() as u64,
            steps,
        },
    })
}

type PipelineOutput = (ExperimentResults, Vec<Verdict>, Vec<ReplicaFailure>, u64);

fn run_clt(cfg: &RawConfig, exp: &Experiment) -> Result<PipelineOutput, HarnessError> {
    let tau = cfg.f64("experiment", "tau")?;
    let lambda = cfg.f64("experiment", "lambda")?;
    let warmup = cfg.u64_or("experiment", "warmup_steps", 0)?;
    let indep_factor = cfg.u64_or("experiment", "indep_factor", 100)?;
    let spatial = matches!(exp.spec.kind, ModelKind::Spde(_));
    let gamma = exp.functional.gamma;
    let params = clt_params(tau, lambda, exp.spec.meta.alpha, gamma, spatial)?;
    let dt = step_size(exp, tau)?;
    let condition = check_condition(
        exp.functional.p,
        gamma,
        lambda,
        &exp.spec.meta,
        exp.spec.meta.moment_bound_q,
        exp.spec.meta.moment_bound_r,
    );

    // Independent long run for μ̂/v̂² and the single-trajectory
    // variance estimators.
    let indep_len = cfg.u64_or("experiment", "indep_len", params.k * indep_factor)?;
    let indep_initial = replica_initial(exp, tau, INDEPENDENT_REPLICA, true);
    let indep_series = collect_f_series(
        &exp.spec,
        exp.scheme,
        &dt,
        &exp.functional,
        indep_initial,
        indep_len,
        &exp.newton,
    )?;
    let (mu_f, mu_f_source) = match oracle_mu(exp, tau) {
        Some(v) => (v, "analytic".to_string()),
        None => (
            time_average(&indep_series, indep_series.len())?,
            "independent_run".to_string(),
        ),
    };
    let lag = if cfg.has("experiment", "plugin_lag") {
        Some(cfg.u64("experiment", "plugin_lag")? as usize)
    } else {
        None
    };
    let plugin = variance_plugin(&indep_series, tau, lag)?;
    let batch_size = cfg.u64_or(
        "experiment",
        "batch_size",
        (indep_len as f64).sqrt().floor().max(2.0) as u64,
    )? as usize;
    let batch = variance_batch_means(&indep_series, tau, batch_size)?;
    let v2_oracle = oracle_v2(exp);
    let v2_source_cfg = cfg.str_or(
        "experiment",
        "v2_source",
        if v2_oracle.is_some() {
            "oracle"
        } else {
            "independent"
        },
    )?;
    let (v2_null, v2_source) = match v2_source_cfg.as_str() {
        "oracle" => match v2_oracle {
            Some(v) => (v, "oracle".to_string()),
            None => {
                return Err(cfg_err(
                    "experiment.v2_source",
                    "no closed-form variance exists for this model/functional",
                ))
            }
        },
        "independent" => (plugin.value, "independent_run_plugin".to_string()),
        other => {
            return Err(cfg_err(
                "experiment.v2_source",
                format!("unknown source `{other}` (oracle | independent)"),
            ))
        }
    };

    // Replica statistics.
    let results = replica_map(exp.replicas, exp.threads, |r| {
        let initial = replica_initial(exp, tau, r, true);
        let mut state = initial;
        for _ in 0..warmup {
            state = step(exp.scheme, &exp.spec, &state, &dt, &exp.newton)?;
        }
        let series = collect_f_series(
            &exp.spec,
            exp.scheme,
            &dt,
            &exp.functional,
            state,
            params.k,
            &exp.newton,
        )?;
        clt_statistic(&series, &params, mu_f)
    });
    let mut statistics = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => statistics.push(s),
            Err(e) => failures.push(ReplicaFailure {
                replica: r as u64,
                error: e.to_string(),
            }),
        }
    }
    let replica_est = variance_replica(&statistics)?;
    let ks = ks_test(&statistics, v2_null)?;

    let ks_p_min = cfg.f64_or("tolerances", "ks_p_min", 0.01)?;
    let mut verdicts = vec![
        Verdict::new(
            "condition",
            condition.clt_pass,
            condition.clt_required,
            "moment exponents satisfy the CLT inequality",
        ),
        Verdict::new(
            "ks_p",
            ks.p_value > ks_p_min,
            ks.p_value,
            format!("p > {ks_p_min}"),
        ),
    ];
    if v2_source == "oracle" {
        let window = if cfg.has("tolerances", "var_window") {
            let w = cfg.f64_list("tolerances", "var_window")?;
            if w.len() != 2 {
                return Err(cfg_err("tolerances.var_window", "expected [lo, hi]"));
            }
            (w[0], w[1])
        } else {
            (0.85, 1.15)
        };
        let ratio = replica_est.value / v2_null;
        verdicts.push(Verdict::new(
            "sample_variance",
            ratio >= window.0 && ratio <= window.1,
            ratio,
            format!("v̂²/v² in [{}, {}]", window.0, window.1),
        ));
    }
    let steps = indep_len + exp.replicas * (warmup + params.k);
    Ok((
        ExperimentResults::Clt(CltResults {
            k: params.k,
            h_coupled: params.h,
            mu_f,
            mu_f_source,
            v2_null,
            v2_source,
            sample_variance: replica_est.value,
            ks_statistic: ks.statistic,
            ks_p_value: ks.p_value,
            condition,
            variance_estimates: vec![plugin, batch, replica_est],
            statistics,
        }),
        verdicts,
        failures,
        steps,
    ))
}

fn run_lln(cfg: &RawConfig, exp: &Experiment) -> Result<PipelineOutput, HarnessError> {
    let tau = cfg.f64("experiment", "tau")?;
    let dt = step_size(exp, tau)?;
    let k_grid = cfg.u64_list("experiment", "k_grid")?;
    if k_grid.is_empty() || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(cfg_err(
            "experiment.k_grid",
            "need a strictly increasing, nonempty grid",
        ));
    }
    let k_burn = cfg.u64_or("experiment", "k_burn", 0)?;
    let max_k = *k_grid.last().unwrap();

    let (reference, reference_source) = match oracle_mu(exp, tau) {
        Some(v) => (v, "analytic".to_string()),
        None => {
            let len = cfg.u64_or("experiment", "reference_len", 10 * max_k)?;
            let initial = replica_initial(exp, tau, INDEPENDENT_REPLICA, true);
            let series = collect_f_series(
                &exp.spec,
                exp.scheme,
                &dt,
                &exp.functional,
                initial,
                len,
                &exp.newton,
            )?;
            (
                time_average(&series, series.len())?,
                "independent_run".to_string(),
            )
        }
    };

    let results = replica_map(exp.replicas, exp.threads, |r| {
        let mut state = replica_initial(exp, tau, r, true);
        for _ in 0..k_burn {
            state = step(exp.scheme, &exp.spec, &state, &dt, &exp.newton)?;
        }
        let series = collect_f_series(
            &exp.spec,
            exp.scheme,
            &dt,
            &exp.functional,
            state,
            max_k,
            &exp.newton,
        )?;
        let prefix: Vec<f64> = k_grid
            .iter()
            .map(|&k| time_average(&series, k as usize))
            .collect::<Result<_, _>>()?;
        let half = series.len() / 2;
        let first = time_average(&series, half.max(1))?;
        let second: f64 = series[half..].iter().sum::<f64>() / (series.len() - half).max(1) as f64;
        let overall = time_average(&series, series.len())?;
        Ok((prefix, first, second, overall))
    });
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => failures.push(ReplicaFailure {
                replica: r as u64,
                error: e.to_string(),
            }),
        }
    }
    if ok.is_empty() {
        return Err(HarnessError::Sim(SimError::InsufficientData {
            needed: 1,
            got: 0,
        }));
    }
    let n_ok = ok.len() as f64;
    let means: Vec<(u64, f64)> = k_grid
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, ok.iter().map(|(p, _, _, _)| p[i]).sum::<f64>() / n_ok))
        .collect();
    let mse: Vec<(f64, f64)> = k_grid
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let m = ok
                .iter()
                .map(|(p, _, _, _)| (p[i] - reference) * (p[i] - reference))
                .sum::<f64>()
                / n_ok;
            (k as f64 * tau, m)
        })
        .collect();
    let stability_drift = ok
        .iter()
        .map(|(_, first, second, overall)| (second - first).abs() / overall.abs().max(1e-300))
        .sum::<f64>()
        / n_ok;
    let span_ok = k_grid.len() >= 2
        && (*k_grid.last().unwrap() as f64 / k_grid[0] as f64) >= 10f64.powf(1.5) - 1e-9;
    let fit = if span_ok {
        rate_fit_from_mse(&mse).ok()
    } else {
        None
    };

    let mut verdicts = Vec::new();
    if reference_source == "analytic" {
        let tol = cfg.f64_or("tolerances", "lln_abs_tol", 0.01)?;
        let err = (means.last().unwrap().1 - reference).abs();
        verdicts.push(Verdict::new(
            "mean_abs_error",
            err <= tol,
            err,
            format!("|S_k/k − μ(f)| ≤ {tol} at the largest k"),
        ));
    }
    if let Some(fit) = &fit {
        let lo = cfg.f64_or("tolerances", "rate_slope_lo", -1.15)?;
        let hi = cfg.f64_or("tolerances", "rate_slope_hi", -0.85)?;
        verdicts.push(Verdict::new(
            "rate_slope",
            fit.slope >= lo && fit.slope <= hi,
            fit.slope,
            format!("log-log MSE slope in [{lo}, {hi}]"),
        ));
    }
    if cfg.has("tolerances", "stability_max_drift") {
        let tol = cfg.f64("tolerances", "stability_max_drift")?;
        verdicts.push(Verdict::new(
            "stability_drift",
            stability_drift < tol,
            stability_drift,
            format!("half-trajectory drift < {tol} of the level"),
        ));
    }
    let steps = exp.replicas * (k_burn + max_k);
    Ok((
        ExperimentResults::Lln(LlnResults {
            means,
            mse: if reference_source == "analytic" || !ok.is_empty() {
                mse
            } else {
                vec![]
            },
            reference,
            reference_source,
            rate_slope: fit.as_ref().map(|f| f.slope),
            rate_r_squared: fit.as_ref().map(|f| f.r_squared),
            stability_drift,
        }),
        verdicts,
        failures,
        steps,
    ))
}

/// Scheme chain and exactly sampled chain advanced with shared
/// standard normals, both started from the same stationary quantile:
/// the common randomness cancels the sampling noise that would
/// otherwise swamp the O(τ) distance between the two stationary laws.
#[allow(clippy::too_many_arguments)]
fn ou_coupled_clouds(
    scheme: SchemeKind,
    theta: f64,
    sigma: f64,
    tau: f64,
    n: u64,
    burn: u64,
    thinning: u64,
    seed: u64,
    level: u64,
) -> Result<(EmpiricalMeasure, EmpiricalMeasure), SimError> {
    let v_scheme =
        oracles::scheme_ou_stationary_variance(scheme, theta, sigma, tau).ok_or_else(|| {
            SimError::InvalidParam(format!(
                "no stationary sampler for scheme {}",
                scheme.name()
            ))
        })?;
    let v_exact = oracles::ou_stationary_variance(theta, sigma);
    let (decay, noise_std) = oracles::ou_exact_transition(theta, sigma, tau);
    let stream = NoiseStream::new(seed, level, PURPOSE_PATH);
    let init = NoiseStream::new(seed, level, PURPOSE_INIT);
    let z0 = init.normal(0, 0);
    let mut y = v_scheme.sqrt() * z0;
    let mut x = v_exact.sqrt() * z0;
    let total = burn + n * thinning;
    let mut cloud_scheme = Vec::with_capacity(n as usize);
    let mut cloud_exact = Vec::with_capacity(n as usize);
    for k in 0..total {
        let z = stream.normal(k, 0);
        y = match scheme {
            SchemeKind::Bem => (y + sigma * tau.sqrt() * z) / (1.0 + theta * tau),
            SchemeKind::Em => y * (1.0 - theta * tau) + sigma * tau.sqrt() * z,
            _ => unreachable!("guarded by the stationary-variance lookup"),
        };
        x = decay * x + noise_std * z;
        if k + 1 > burn && (k + 1 - burn) % thinning == 0 {
            cloud_scheme.push(y);
            cloud_exact.push(x);
        }
    }
    Ok((
        EmpiricalMeasure::from_scalars(cloud_scheme)?,
        EmpiricalMeasure::from_scalars(cloud_exact)?,
    ))
}

fn run_invariant(cfg: &RawConfig, exp: &Experiment) -> Result<PipelineOutput, HarnessError> {
    let tau_grid = cfg.f64_list("experiment", "tau_grid")?;
    if tau_grid.is_empty() {
        return Err(cfg_err(
            "experiment.tau_grid",
            "need at least one step size",
        ));
    }
    let n = cfg.u64_or("experiment", "samples", 100_000)?;
    let burn = cfg.u64_or("experiment", "burn", 10_000)?;
    let thinning = cfg.u64_or("experiment", "thinning", 1)?;
    let mut levels = Vec::new();
    let mut steps = 0u64;
    for (li, &tau) in tau_grid.iter().enumerate() {
        steps += burn + n * thinning;
        if let Some((theta, sigma, 1)) = exp.ou {
            let (cloud_scheme, cloud_exact) = ou_coupled_clouds(
                exp.scheme, theta, sigma, tau, n, burn, thinning, exp.seed, li as u64,
            )?;
            let w2 = wasserstein2_1d(&cloud_scheme, &cloud_exact)?;
            let v_scheme =
                oracles::scheme_ou_stationary_variance(exp.scheme, theta, sigma, tau).unwrap();
            levels.push(InvariantLevel {
                tau,
                w2_vs_exact: Some(w2),
                second_moment: cloud_scheme.moment(2.0)?,
                analytic_gap: Some(
                    (v_scheme - oracles::ou_stationary_variance(theta, sigma)).abs(),
                ),
            });
        } else {
            let dt = step_size(exp, tau)?;
            let cloud = crate::measures::invariant_cloud(
                &exp.spec,
                exp.scheme,
                &dt,
                burn + n * thinning,
                burn,
                thinning,
                exp.seed.wrapping_add(li as u64),
            )?;
            levels.push(InvariantLevel {
                tau,
                w2_vs_exact: None,
                second_moment: cloud.moment(2.0)?,
                analytic_gap: None,
            });
        }
    }
    let w2s: Vec<(f64, f64)> = levels
        .iter()
        .filter_map(|l| l.w2_vs_exact.map(|w| (l.tau, w)))
        .collect();
    let (w2_slope, monotone) = if w2s.len() >= 2 {
        let fit = rate_fit_from_mse(&w2s.iter().map(|&(t, w)| (t, w * w)).collect::<Vec<_>>()).ok();
        // MSE fit works on squared distances; halve the slope.
        let slope = fit.map(|f| f.slope / 2.0);
        let mut sorted = w2s.clone();
        sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mono = sorted.windows(2).all(|w| w[1].1 < w[0].1);
        (slope, Some(mono))
    } else {
        (None, None)
    };
    let gaps: Vec<(f64, f64)> = levels
        .iter()
        .filter_map(|l| l.analytic_gap.map(|g| (l.tau, g)))
        .collect();
    let analytic_slope = if gaps.len() >= 2 {
        rate_fit_from_mse(&gaps.iter().map(|&(t, g)| (t, g * g)).collect::<Vec<_>>())
            .ok()
            .map(|f| f.slope / 2.0)
    } else {
        None
    };
    let mut verdicts = Vec::new();
    if let Some(mono) = monotone {
        verdicts.push(Verdict::new(
            "w2_monotone",
            mono,
            mono as u8 as f64,
            "W₂ to the exact stationary cloud decreases with τ",
        ));
    }
    if let Some(slope) = w2_slope {
        let min_slope = cfg.f64_or("tolerances", "w2_slope_min", 0.8)?;
        verdicts.push(Verdict::new(
            "w2_order_slope",
            slope >= min_slope,
            slope,
            format!("log-log W₂ slope ≥ {min_slope}"),
        ));
    }
    if let Some(slope) = analytic_slope {
        verdicts.push(Verdict::new(
            "analytic_gap_slope",
            (slope - 1.0).abs() <= 0.1,
            slope,
            "closed-form variance gap scales linearly in τ",
        ));
    }
    Ok((
        ExperimentResults::Invariant(InvariantResults {
            levels,
            w2_slope,
            analytic_slope,
            monotone,
        }),
        verdicts,
        Vec::new(),
        steps,
    ))
}

fn mixing_pairs(exp: &Experiment, distances: &[f64]) -> Vec<(StateValue, StateValue)> {
    distances
        .iter()
        .map(|&dist| match &exp.spec.kind {
            ModelKind::Sode(m) => {
                let base = vec![0.0; m.dim];
                let mut moved = base.clone();
                moved[0] += dist;
                (StateValue::Vector(base), StateValue::Vector(moved))
            }
            ModelKind::Spde(m) => {
                let base = vec![0.0; m.n_modes];
                let mut moved = base.clone();
                moved[0] += dist;
                (StateValue::Vector(base), StateValue::Vector(moved))
            }
            ModelKind::Sfde(m) => {
                let nodes = m.n_seg + 1;
                let seg = |v: f64| {
                    StateValue::Segment(SegmentState {
                        dim: m.dim,
                        n_seg: m.n_seg,
                        delay: m.delay,
                        values: vec![v; nodes * m.dim],
                    })
                };
                (seg(0.0), seg(dist))
            }
        })
        .collect()
}

fn mixing_verdicts(
    cfg: &RawConfig,
    fit: &crate::measures::MixingFit,
) -> Result<Vec<Verdict>, HarnessError> {
    let r2_min = cfg.f64_or("tolerances", "r2_min", 0.95)?;
    let mut verdicts = vec![
        Verdict::new(
            "fit_r2",
            fit.r_squared >= r2_min,
            fit.r_squared,
            format!("R² ≥ {r2_min}"),
        ),
        Verdict::new("rate_positive", fit.rate > 0.0, fit.rate, "fitted rate > 0"),
    ];
    if cfg.has("tolerances", "rate_ref") {
        let c_ref = cfg.f64("tolerances", "rate_ref")?;
        let rel = cfg.f64_or("tolerances", "rate_rel_tol", 0.02)?;
        let err = (fit.rate / c_ref - 1.0).abs();
        verdicts.push(Verdict::new(
            "rate_vs_reference",
            err <= rel,
            fit.rate,
            format!("|ĉ/{c_ref} − 1| ≤ {rel}"),
        ));
    }
    if cfg.has("tolerances", "rate_min") {
        let c_min = cfg.f64("tolerances", "rate_min")?;
        verdicts.push(Verdict::new(
            "rate_min",
            fit.rate >= c_min,
            fit.rate,
            format!("ĉ ≥ {c_min}"),
        ));
    }
    Ok(verdicts)
}

fn thin_table(table: &[(f64, f64)], max_rows: usize) -> Vec<(f64, f64)> {
    if table.len() <= max_rows {
        return table.to_vec();
    }
    let stride = table.len().div_ceil(max_rows);
    table.iter().step_by(stride).copied().collect()
}

fn run_mixing(cfg: &RawConfig, exp: &Experiment) -> Result<PipelineOutput, HarnessError> {
    let tau = cfg.f64("experiment", "tau")?;
    let dt = step_size(exp, tau)?;
    let horizon_k = cfg.u64_or("experiment", "horizon_k", (4.0 / tau) as u64)?;
    let distances = if cfg.has("experiment", "pair_distances") {
        cfg.f64_list("experiment", "pair_distances")?
    } else {
        vec![1.0]
    };
    let pairs = mixing_pairs(exp, &distances);
    let report = check_contraction(
        &exp.spec,
        exp.scheme,
        &dt,
        &pairs,
        horizon_k,
        exp.replicas,
        exp.seed,
    )?;
    let verdicts = mixing_verdicts(cfg, &report.fit)?;
    let steps = exp.replicas * horizon_k * pairs.len() as u64 * 2;
    Ok((
        ExperimentResults::Mixing(MixingResults {
            fit: report.fit,
            excluded_pairs: report.excluded_pairs,
            table: thin_table(&report.table, 512),
        }),
        verdicts,
        Vec::new(),
        steps,
    ))
}

/// τ grid, horizon, replicas, reference, fine factor, initial state.
type OrderInputs = (Vec<f64>, f64, u64, OrderReference, u64, Option<Vec<f64>>);

fn order_inputs(cfg: &RawConfig, exp: &Experiment) -> Result<OrderInputs, HarnessError> {
    let tau_grid = cfg.f64_list("experiment", "tau_grid")?;
    let horizon_t = cfg.f64_or("experiment", "horizon_t", 1.0)?;
    let fine_factor = cfg.u64_or("experiment", "fine_factor", 64)?;
    let replicas = exp.replicas;
    let reference = match cfg.str_or("experiment", "reference", "fine")?.as_str() {
        "exact" => {
            let Some((theta, sigma, _)) = exp.ou else {
                return Err(cfg_err(
                    "experiment.reference",
                    "the exact reference requires the `ou` model",
                ));
            };
            OrderReference::ExactOu { theta, sigma }
        }
        "fine" => OrderReference::Fine,
        other => {
            return Err(cfg_err(
                "experiment.reference",
                format!("unknown reference `{other}` (exact | fine)"),
            ))
        }
    };
    let initial = if cfg.has("experiment", "x0") {
        let x0 = cfg.f64("experiment", "x0")?;
        let dim = match &exp.spec.kind {
            ModelKind::Sode(m) => m.dim,
            ModelKind::Spde(m) => m.n_modes,
            ModelKind::Sfde(_) => 0,
        };
        if dim > 0 {
            let mut v = vec![0.0; dim];
            v[0] = x0;
            Some(v)
        } else {
            None
        }
    } else {
        None
    };
    Ok((
        tau_grid,
        horizon_t,
        replicas,
        reference,
        fine_factor,
        initial,
    ))
}

fn order_verdicts(cfg: &RawConfig, results: &OrderResults) -> Result<Vec<Verdict>, HarnessError> {
    let lo = cfg.f64_or("tolerances", "order_slope_lo", 0.4)?;
    let hi = cfg.f64_or("tolerances", "order_slope_hi", 1.6)?;
    let mut verdicts = Vec::new();
    if let Some(slope) = results.slope {
        verdicts.push(Verdict::new(
            "order_slope",
            slope >= lo && slope <= hi,
            slope,
            format!("strong-order slope in [{lo}, {hi}]"),
        ));
    }
    Ok(verdicts)
}

fn run_order(cfg: &RawConfig, exp: &Experiment) -> Result<PipelineOutput, HarnessError> {
    let (tau_grid, horizon_t, replicas, reference, fine_factor, initial) = order_inputs(cfg, exp)?;
    let report = check_strong_order(
        &exp.spec,
        OrderSubject::Scheme(exp.scheme),
        &tau_grid,
        horizon_t,
        replicas,
        exp.seed,
        reference,
        fine_factor,
        initial,
    )?;
    let results = OrderResults {
        per_tau: report.per_tau.clone(),
        slope: report.slope,
        r_squared: report.r_squared,
    };
    let verdicts = order_verdicts(cfg, &results)?;
    let tau_min = tau_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let steps = replicas * ((horizon_t / tau_min) as u64) * fine_factor;
    Ok((
        ExperimentResults::Order(results),
        verdicts,
        Vec::new(),
        steps,
    ))
}

fn run_assumptions(cfg: &RawConfig, exp: &Experiment) -> Result<PipelineOutput, HarnessError> {
    let checks: Vec<String> = match cfg.get("experiment", "checks") {
        Some(ConfigValue::List(items)) => items.iter().map(|v| v.to_string()).collect(),
        Some(other) => {
            return Err(cfg_err(
                "experiment.checks",
                format!("expected an array of check names, got {other}"),
            ))
        }
        None => vec!["moment".into(), "contraction".into()],
    };
    let tau = cfg.f64("experiment", "tau")?;
    let dt = step_size(exp, tau)?;
    let mut verdicts = Vec::new();
    let mut moment = None;
    let mut contraction_fit = None;
    let mut contraction_pass = None;
    let mut order = None;
    let mut steps = 0u64;
    for check in &checks {
        match check.as_str() {
            "moment" => {
                let q = cfg.f64_or("experiment", "q", 2.0)?;
                let horizon_k = cfg.u64_or("experiment", "horizon_k", 2000)?;
                let initial_values = if cfg.has("experiment", "initials") {
                    cfg.f64_list("experiment", "initials")?
                } else {
                    vec![0.0, 2.0]
                };
                let initials: Vec<StateValue> = initial_values
                    .iter()
                    .map(|&x| match &exp.spec.kind {
                        ModelKind::Sode(m) => {
                            let mut v = vec![0.0; m.dim];
                            v[0] = x;
                            StateValue::Vector(v)
                        }
                        ModelKind::Spde(m) => {
                            let mut v = vec![0.0; m.n_modes];
                            v[0] = x;
                            StateValue::Vector(v)
                        }
                        ModelKind::Sfde(m) => StateValue::Segment(SegmentState {
                            dim: m.dim,
                            n_seg: m.n_seg,
                            delay: m.delay,
                            values: vec![x; (m.n_seg + 1) * m.dim],
                        }),
                    })
                    .collect();
                let slope_tol = cfg.f64_or("tolerances", "moment_slope_tol", 0.05)?;
                let report = check_moment_bound(
                    &exp.spec,
                    exp.scheme,
                    &dt,
                    q,
                    horizon_k,
                    exp.replicas,
                    &initials,
                    exp.seed,
                    slope_tol,
                )?;
                steps += exp.replicas * horizon_k * initials.len() as u64;
                verdicts.push(Verdict::new(
                    "moment_check",
                    report.pass,
                    if report.overflow {
                        f64::INFINITY
                    } else {
                        report
                            .per_initial
                            .iter()
                            .map(|c| c.second_half_slope)
                            .fold(0.0f64, f64::max)
                    },
                    "uniform moment bound (overflow fails)",
                ));
                moment = Some(report);
            }
            "contraction" => {
                let horizon_k = cfg.u64_or("experiment", "horizon_k", (4.0 / tau) as u64)?;
                let distances = if cfg.has("experiment", "pair_distances") {
                    cfg.f64_list("experiment", "pair_distances")?
                } else {
                    vec![1.0]
                };
                let pairs = mixing_pairs(exp, &distances);
                let report = check_contraction(
                    &exp.spec,
                    exp.scheme,
                    &dt,
                    &pairs,
                    horizon_k,
                    exp.replicas,
                    exp.seed,
                )?;
                steps += exp.replicas * horizon_k * pairs.len() as u64 * 2;
                for v in mixing_verdicts(cfg, &report.fit)? {
                    verdicts.push(Verdict::new(
                        &format!("contraction_{}", v.name),
                        v.pass,
                        v.observed,
                        v.criterion.clone(),
                    ));
                }
                contraction_pass = Some(report.pass);
                contraction_fit = Some(report.fit);
            }
            "order" => {
                let (tau_grid, horizon_t, replicas, reference, fine_factor, initial) =
                    order_inputs(cfg, exp)?;
                let report = check_strong_order(
                    &exp.spec,
                    OrderSubject::Scheme(exp.scheme),
                    &tau_grid,
                    horizon_t,
                    replicas,
                    exp.seed,
                    reference,
                    fine_factor,
                    initial,
                )?;
                let results = OrderResults {
                    per_tau: report.per_tau.clone(),
                    slope: report.slope,
                    r_squared: report.r_squared,
                };
                verdicts.extend(order_verdicts(cfg, &results)?);
                order = Some(results);
            }
            other => {
                return Err(cfg_err(
                    "experiment.checks",
                    format!("unknown check `{other}` (moment | contraction | order)"),
                ))
            }
        }
    }
    Ok((
        ExperimentResults::Assumptions(AssumptionsResults {
            moment,
            contraction_fit,
            contraction_pass,
            order,
        }),
        verdicts,
        Vec::new(),
        steps,
    ))
}
