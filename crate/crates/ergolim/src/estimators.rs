//! Time-averaging estimators and their asymptotics: the k/τ/h
//! parameter couplings, the admissibility condition on the functional
//! exponents, the normalized CLT statistic, and three estimators of
//! the asymptotic variance
//!
//! ```text
//! v² = τ·c₀ + 2τ·Σ_{j≥1} c_j
//! ```
//!
//! (integrated autocovariance of the f-series along the stationary
//! chain): a truncated-lag plug-in sum, non-overlapping batch means,
//! and the cross-replica sample variance of the normalized statistic.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::functionals::TestFunctional;
use crate::models::{AssumptionMeta, ModelSpec};
use crate::numutil::{line_fit, mean, sample_variance};
use crate::schemes::{step, NewtonConfig, PathState, SchemeKind, StepSize};

/// CLT experiment coupling: horizon k = ⌈τ^{−1−2λ}⌉ with
/// λ ∈ (0, α₂γ), and spatial parameter h = τ^{α₂/α₁} for spatially
/// discretized models (0 otherwise). Burn-in applies to LLN-style runs
/// only; the CLT statistic always starts at the first collected value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltParams {
    pub lambda: f64,
    pub tau: f64,
    pub k: u64,
    pub h: f64,
    pub k_burn: u64,
}

/// Compute the coupling for a given step size. `spatial` selects
/// whether the h-coupling applies.
pub fn clt_params(
    tau: f64,
    lambda: f64,
    alpha: (f64, f64),
    gamma: f64,
    spatial: bool,
) -> Result<CltParams, SimError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(SimError::InvalidParam(format!(
            "tau must lie in (0,1], got {tau}"
        )));
    }
    let limit = alpha.1 * gamma;
    if !(lambda > 0.0 && lambda < limit) {
        return Err(SimError::InvalidParam(format!(
            "lambda out of open interval (0, {limit}): got {lambda}"
        )));
    }
    let raw = tau.powf(-1.0 - 2.0 * lambda);
    // ⌈·⌉ with protection against floating dust just above an integer.
    let nearest = raw.round();
    let k = if (raw - nearest).abs() < 1e-6 * nearest.max(1.0) {
        nearest as u64
    } else {
        raw.ceil() as u64
    };
    if k == 0 {
        return Err(SimError::InvalidParam("coupling produced k = 0".into()));
    }
    let h = if spatial {
        tau.powf(alpha.1 / alpha.0)
    } else {
        0.0
    };
    Ok(CltParams {
        lambda,
        tau,
        k,
        h,
        k_burn: 0,
    })
}

/// Outcome of the admissibility check on the functional exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Minimal q∧r that satisfies the CLT inequality.
    pub clt_required: f64,
    /// Minimal q that satisfies the LLN inequality.
    pub lln_required: f64,
    pub clt_pass: bool,
    pub lln_pass: bool,
    pub lambda_ok: bool,
    pub reason: Option<String>,
}

/// Evaluate the admissibility inequalities for a functional with
/// growth exponent `p` and Hölder exponent `gamma` under the model's
/// moment/mixing metadata:
///
/// ```text
/// CLT:  q̃²·(3 ∨ (1/λ + 1))·(p(q̃∨r̃) + (3 + 4(κ∨β))γ) ≤ q ∧ r
/// LLN:  p(1 + q̃) + 2(1 + κ)γ ≤ q
/// ```
///
/// `q`/`r` of `None` mean the corresponding moment bound holds at
/// every order, so the inequalities pass automatically.
pub fn check_condition(
    p: f64,
    gamma: f64,
    lambda: f64,
    meta: &AssumptionMeta,
    q: Option<f64>,
    r: Option<f64>,
) -> ConditionReport {
    let qt = meta.q_tilde;
    let rt = meta.r_tilde;
    let clt_required = qt
        * qt
        * 3f64.max(1.0 / lambda + 1.0)
        * (p * qt.max(rt) + (3.0 + 4.0 * meta.kappa.max(meta.beta)) * gamma);
    let lln_required = p * (1.0 + qt) + 2.0 * (1.0 + meta.kappa) * gamma;
    let lambda_limit = meta.alpha.1 * gamma;
    let lambda_ok = lambda > 0.0 && lambda < lambda_limit;
    let q_and_r = match (q, r) {
        (Some(q), Some(r)) => q.min(r),
        (Some(q), None) => q,
        (None, Some(r)) => r,
        (None, None) => f64::INFINITY,
    };
    let clt_pass = lambda_ok && q_and_r >= clt_required;
    let lln_pass = q.unwrap_or(f64::INFINITY) >= lln_required;
    let reason = if !lambda_ok {
        Some(format!("lambda out of open interval (0, {lambda_limit})"))
    } else if !clt_pass {
        Some(format!("q∧r = {q_and_r} below required {clt_required}"))
    } else {
        None
    };
    ConditionReport {
        clt_required,
        lln_required,
        clt_pass,
        lln_pass,
        lambda_ok,
        reason,
    }
}

/// Arithmetic mean of the first `k` values.
pub fn time_average(values: &[f64], k: usize) -> Result<f64, SimError> {
    if k == 0 {
        return Err(SimError::InvalidParam("time average needs k ≥ 1".into()));
    }
    if values.len() < k {
        return Err(SimError::InsufficientData {
            needed: k,
            got: values.len(),
        });
    }
    Ok(values[..k].iter().sum::<f64>() / k as f64)
}

/// Normalized fluctuation statistic
/// √(τ/k) · Σ_{i<k} (f_i − μf) = (1/√(kτ)) Σ (f_i − μf) τ.
pub fn clt_statistic(values: &[f64], params: &CltParams, mu_f: f64) -> Result<f64, SimError> {
    let k = params.k as usize;
    if values.len() < k {
        return Err(SimError::InsufficientData {
            needed: k,
            got: values.len(),
        });
    }
    let sum: f64 = values[..k].iter().map(|v| v - mu_f).sum();
    Ok((params.tau / k as f64).sqrt() * sum)
}

/// Method tag of a variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    Plugin,
    BatchMeans,
    Replica,
}

/// An asymptotic-variance estimate with its tuning parameter and
/// diagnostic flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub method: VarianceMethod,
    pub value: f64,
    /// Truncation lag (plugin), batch size (batch means), or replica
    /// count (replica).
    pub window: usize,
    pub std_error: Option<f64>,
    /// Raw sum was negative and clamped to zero.
    pub clamped: bool,
    /// Last retained autocovariance exceeds 5% of lag zero; the
    /// truncation is suspect.
    pub tail_suspect: bool,
}

fn autocovariances(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let m = mean(values);
    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut acc = 0.0;
        for i in 0..(n - lag) {
            acc += (values[i] - m) * (values[i + lag] - m);
        }
        out.push(acc / n as f64);
    }
    out
}

/// Default truncation lag: ten autocovariance e-folding times, capped
/// at n/100. The decay scale is read off the series as the first lag
/// at which the autocovariance drops below c₀/e.
fn default_lag(values: &[f64]) -> usize {
    let n = values.len();
    let cap = (n / 100).max(1).min(n - 1);
    let m = mean(values);
    let c_at = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..(n - lag) {
            acc += (values[i] - m) * (values[i + lag] - m);
        }
        acc / n as f64
    };
    let c0 = c_at(0);
    if c0 <= 0.0 {
        return 1;
    }
    let threshold = c0 / std::f64::consts::E;
    let mut j_e = cap;
    for lag in 1..=cap {
        if c_at(lag) <= threshold {
            j_e = lag;
            break;
        }
    }
    (10 * j_e).clamp(1, cap)
}

/// Truncated integrated-autocovariance estimator of the asymptotic
/// variance: v̂² = τ·ĉ₀ + 2τ·Σ_{j=1}^{L} ĉ_j. With `lag = None` the
/// truncation defaults to ten decay times, capped at n/100. Negative
/// totals clamp to zero with a flag; a non-negligible last retained
/// autocovariance sets `tail_suspect`.
pub fn variance_plugin(
    values: &[f64],
    tau: f64,
    lag: Option<usize>,
) -> Result<VarianceEstimate, SimError> {
    let n = values.len();
    if n < 2 {
        return Err(SimError::InsufficientData { needed: 2, got: n });
    }
    let lag = match lag {
        Some(l) => {
            if l >= n {
                return Err(SimError::InvalidParam(format!(
                    "lag {l} must be below the series length {n}"
                )));
            }
            l
        }
        None => default_lag(values),
    };
    let c = autocovariances(values, lag);
    let raw = tau * c[0] + 2.0 * tau * c[1..].iter().sum::<f64>();
    let clamped = raw < 0.0;
    let value = raw.max(0.0);
    let tail_suspect = lag >= 1 && c[0] > 0.0 && c[lag].abs() > 0.05 * c[0];
    let std_error = Some(value * (2.0 * (2.0 * lag as f64 + 1.0) / n as f64).sqrt());
    Ok(VarianceEstimate {
        method: VarianceMethod::Plugin,
        value,
        window: lag,
        std_error,
        clamped,
        tail_suspect,
    })
}

/// Batch-means estimator: v̂² = B·τ · sample variance of the means of
/// ⌊n/B⌋ non-overlapping batches.
pub fn variance_batch_means(
    values: &[f64],
    tau: f64,
    batch: usize,
) -> Result<VarianceEstimate, SimError> {
    let n = values.len();
    if batch == 0 {
        return Err(SimError::InvalidParam("batch size must be ≥ 1".into()));
    }
    if n < 2 * batch {
        return Err(SimError::InsufficientData {
            needed: 2 * batch,
            got: n,
        });
    }
    let m = n / batch;
    let means: Vec<f64> = (0..m)
        .map(|b| values[b * batch..(b + 1) * batch].iter().sum::<f64>() / batch as f64)
        .collect();
    let value = batch as f64 * tau * sample_variance(&means);
    let std_error = Some(value * (2.0 / (m as f64 - 1.0)).sqrt());
    Ok(VarianceEstimate {
        method: VarianceMethod::BatchMeans,
        value,
        window: batch,
        std_error,
        clamped: false,
        tail_suspect: false,
    })
}

/// Cross-replica estimator: sample variance of independent normalized
/// statistics (each is a draw whose variance approaches v²).
pub fn variance_replica(statistics: &[f64]) -> Result<VarianceEstimate, SimError> {
    let m = statistics.len();
    if m < 2 {
        return Err(SimError::InsufficientData { needed: 2, got: m });
    }
    let value = sample_variance(statistics);
    let std_error = Some(value * (2.0 / (m as f64 - 1.0)).sqrt());
    Ok(VarianceEstimate {
        method: VarianceMethod::Replica,
        value,
        window: m,
        std_error,
        clamped: false,
        tail_suspect: false,
    })
}

/// Least-squares decay fit of MSE against time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub r_squared: f64,
    /// (t_k, MSE at k) pairs entering the fit.
    pub points: Vec<(f64, f64)>,
}

/// Fit log MSE against log t over the given points.
pub fn rate_fit_from_mse(points: &[(f64, f64)]) -> Result<RateFit, SimError> {
    if points.len() < 2 {
        return Err(SimError::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|&(_, m)| if m > 0.0 { m.ln() } else { f64::NEG_INFINITY })
        .collect();
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(SimError::InvalidParam(
            "MSE vanished; nothing to fit".into(),
        ));
    }
    let fit = line_fit(&xs, &ys)?;
    Ok(RateFit {
        slope: fit.slope,
        r_squared: fit.r_squared,
        points: points.to_vec(),
    })
}

/// Run one trajectory for `steps` steps from `initial`, recording the
/// functional value at every visited state including the initial one
/// (so the result has `steps` entries: f(Y₀), …, f(Y_{steps−1})).
pub fn collect_f_series(
    spec: &ModelSpec,
    scheme: SchemeKind,
    dt: &StepSize,
    f: &TestFunctional,
    initial: PathState,
    steps: u64,
    cfg: &NewtonConfig,
) -> Result<Vec<f64>, SimError> {
    let mut out = Vec::with_capacity(steps as usize);
    let mut state = initial;
    for _ in 0..steps {
        out.push(f.eval(&state.value));
        state = step(scheme, spec, &state, dt, cfg)?;
    }
    Ok(out)
}

/// Mean-squared-error decay of the time average against `reference`
/// over an increasing k-grid, averaged over independent replicas, with
/// the log-log rate fit. The grid must span at least 1.5 decades.
#[allow(clippy::too_many_arguments)]
pub fn lln_rate_fit(
    spec: &ModelSpec,
    scheme: SchemeKind,
    dt: &StepSize,
    f: &TestFunctional,
    k_grid: &[u64],
    replicas: u64,
    seed: u64,
    reference: f64,
) -> Result<RateFit, SimError> {
    validate_k_grid(k_grid)?;
    let max_k = *k_grid.last().unwrap();
    let cfg = NewtonConfig::default();
    let mut sq_err_sums = vec![0.0f64; k_grid.len()];
    for r in 0..replicas {
        let rng = crate::rng::NoiseStream::new(seed, r, crate::rng::PURPOSE_PATH);
        let initial = crate::measures::default_initial_state(spec, rng);
        let series = collect_f_series(spec, scheme, dt, f, initial, max_k, &cfg)?;
        for (slot, &k) in k_grid.iter().enumerate() {
            let avg = time_average(&series, k as usize)?;
            sq_err_sums[slot] += (avg - reference) * (avg - reference);
        }
    }
    let points: Vec<(f64, f64)> = k_grid
        .iter()
        .zip(&sq_err_sums)
        .map(|(&k, &s)| (k as f64 * dt.tau, s / replicas as f64))
        .collect();
    rate_fit_from_mse(&points)
}

fn validate_k_grid(k_grid: &[u64]) -> Result<(), SimError> {
    if k_grid.len() < 2 {
        return Err(SimError::InsufficientData {
            needed: 2,
            got: k_grid.len(),
        });
    }
    for w in k_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(SimError::InvalidParam(
                "k grid must be strictly increasing".into(),
            ));
        }
    }
    let span = *k_grid.last().unwrap() as f64 / k_grid[0] as f64;
    if span < 10f64.powf(1.5) - 1e-9 {
        return Err(SimError::InvalidParam(format!(
            "k grid spans only a factor {span:.1}; need at least 1.5 decades"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_model, Params};
    use crate::rng::{NoiseStream, PURPOSE_PATH};

    fn ou_meta() -> AssumptionMeta {
        builtin_model(
            "ou",
            &Params::new()
                .set_num("theta", 1.0)
                .set_num("sigma", 1.0)
                .set_num("d", 1.0),
        )
        .unwrap()
        .meta
    }

    #[test]
    fn coupling_arithmetic() {
        // τ = 0.01, λ = 0.25 → k = ⌈0.01^{−1.5}⌉ = 1000.
        let p = clt_params(0.01, 0.25, (1.0, 0.5), 1.0, false).unwrap();
        assert_eq!(p.k, 1000);
        assert_eq!(p.h, 0.0);
        assert_eq!(p.k_burn, 0);
        // τ = 0.04, λ = 0.5 with α₂γ > 0.5 needed: use γ = 1, α₂ = 0.6.
        let p2 = clt_params(0.04, 0.5, (1.0, 0.6), 1.0, false).unwrap();
        assert_eq!(p2.k, 625);
    }

    #[test]
    fn coupling_spatial_parameter() {
        // α = (1, 0.5) at τ = 0.04: h = √0.04 = 0.2, i.e. 5 modes.
        let p = clt_params(0.04, 0.2, (1.0, 0.5), 1.0, true).unwrap();
        assert!((p.h - 0.2).abs() < 1e-12);
        assert_eq!((1.0 / p.h).round() as u64, 5);
    }

    #[test]
    fn coupling_rejects_lambda_out_of_range() {
        let err = clt_params(0.01, 0.6, (1.0, 0.5), 1.0, false).unwrap_err();
        match err {
            SimError::InvalidParam(msg) => assert!(msg.contains("lambda"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn condition_examples() {
        // q̃ = r̃ = 1, κ = β = 0, γ = 1, λ = 0.25, p = 2:
        // required q∧r = max(3, 5)·(2 + 3) = 25.
        let meta = ou_meta();
        let rep = check_condition(2.0, 1.0, 0.25, &meta, Some(30.0), Some(40.0));
        assert!((rep.clt_required - 25.0).abs() < 1e-12);
        assert!(rep.clt_pass);
        // LLN: p(1+q̃) + 2(1+κ)γ = 2·2 + 2 = 6.
        assert!((rep.lln_required - 6.0).abs() < 1e-12);
        // Unbounded declared moments always pass.
        let unbounded = check_condition(2.0, 1.0, 0.25, &meta, None, None);
        assert!(unbounded.clt_pass && unbounded.lln_pass);
        // λ at or above α₂γ fails with the range reason.
        let bad = check_condition(2.0, 1.0, 0.5, &meta, None, None);
        assert!(!bad.clt_pass && !bad.lambda_ok);
        assert!(bad.reason.unwrap().contains("lambda out of open interval"));
    }

    #[test]
    fn condition_is_monotone_in_declared_moments() {
        let meta = ou_meta();
        let mut last_pass = false;
        for q in [5.0, 10.0, 20.0, 25.0, 30.0, 100.0] {
            let rep = check_condition(2.0, 1.0, 0.25, &meta, Some(q), Some(q));
            if last_pass {
                assert!(rep.clt_pass, "pass flipped back to fail at q = {q}");
            }
            last_pass = rep.clt_pass;
        }
        assert!(last_pass);
    }

    #[test]
    fn time_average_basics() {
        assert_eq!(time_average(&[1.0, 1.0, 1.0], 3).unwrap(), 1.0);
        assert_eq!(time_average(&[0.0, 2.0], 2).unwrap(), 1.0);
        assert!(matches!(
            time_average(&[1.0], 2),
            Err(SimError::InsufficientData { .. })
        ));
    }

    #[test]
    fn time_average_is_affine_equivariant() {
        let stream = NoiseStream::new(1, 0, PURPOSE_PATH);
        let xs: Vec<f64> = (0..100).map(|i| stream.normal(i, 0)).collect();
        let (a, b) = (2.5, -1.25);
        let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
        let mx = time_average(&xs, 100).unwrap();
        let my = time_average(&ys, 100).unwrap();
        assert!((my - (a + b * mx)).abs() < 1e-12);
    }

    #[test]
    fn clt_statistic_degenerate_cases() {
        let params = CltParams {
            lambda: 0.25,
            tau: 0.01,
            k: 3,
            h: 0.0,
            k_burn: 0,
        };
        // All values at the mean: exactly zero.
        assert_eq!(clt_statistic(&[2.0, 2.0, 2.0], &params, 2.0).unwrap(), 0.0);
        // Single term with τ = 1: the deviation itself.
        let single = CltParams {
            lambda: 0.25,
            tau: 1.0,
            k: 1,
            h: 0.0,
            k_burn: 0,
        };
        assert_eq!(clt_statistic(&[5.0], &single, 3.0).unwrap(), 2.0);
    }

    #[test]
    fn plugin_on_constant_series_is_zero() {
        let est = variance_plugin(&[4.0; 100], 0.5, Some(5)).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn plugin_with_zero_lag_is_tau_c0() {
        let stream = NoiseStream::new(2, 0, PURPOSE_PATH);
        let xs: Vec<f64> = (0..500).map(|i| stream.normal(i, 0)).collect();
        let est = variance_plugin(&xs, 0.25, Some(0)).unwrap();
        let m = mean(&xs);
        let c0 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
        assert!((est.value - 0.25 * c0).abs() < 1e-14);
    }

    #[test]
    fn plugin_on_iid_series_shrinks_with_tau() {
        // On an i.i.d. series only the lag-0 term survives in
        // expectation: v̂² ≈ τ·s².
        let stream = NoiseStream::new(3, 0, PURPOSE_PATH);
        let xs: Vec<f64> = (0..200_000).map(|i| stream.normal(i, 0)).collect();
        let tau = 0.01;
        let est = variance_plugin(&xs, tau, None).unwrap();
        assert!(
            (est.value - tau).abs() < 0.15 * tau,
            "v̂² = {} vs τ·s² = {tau}",
            est.value
        );
    }

    #[test]
    fn plugin_rejects_lag_beyond_series() {
        assert!(variance_plugin(&[0.0; 10], 1.0, Some(10)).is_err());
    }

    #[test]
    fn batch_means_basics() {
        assert_eq!(variance_batch_means(&[3.0; 50], 1.0, 5).unwrap().value, 0.0);
        // B = 1, τ = 1 on i.i.d. N(0,1): reduces to the sample variance.
        let stream = NoiseStream::new(4, 0, PURPOSE_PATH);
        let xs: Vec<f64> = (0..100_000).map(|i| stream.normal(i, 0)).collect();
        let est = variance_batch_means(&xs, 1.0, 1).unwrap();
        assert!((est.value - 1.0).abs() < 0.05, "got {}", est.value);
        assert!(variance_batch_means(&[0.0; 10], 1.0, 6).is_err());
    }

    #[test]
    fn plugin_and_batch_agree_with_ar1_closed_form() {
        // x⁺ = a·x + ε with a = 0.5, ε ~ N(0,1), τ = 1:
        // long-run variance = V(1+a)/(1−a) with V = 1/(1−a²) = 4/3,
        // so v² = 4. Both estimators must land within 10% at n = 1e6.
        let a = 0.5;
        let n = 1_000_000u64;
        let stream = NoiseStream::new(5, 0, PURPOSE_PATH);
        let mut xs = Vec::with_capacity(n as usize);
        let mut x = 0.0;
        for i in 0..n {
            x = a * x + stream.normal(i, 0);
            xs.push(x);
        }
        let truth = (1.0 / (1.0 - a * a)) * (1.0 + a) / (1.0 - a);
        assert_eq!(truth, 4.0);
        let plugin = variance_plugin(&xs, 1.0, None).unwrap();
        assert!(
            (plugin.value - truth).abs() < 0.1 * truth,
            "plugin {} vs {truth}",
            plugin.value
        );
        assert!(!plugin.tail_suspect);
        let batch = variance_batch_means(&xs, 1.0, 1000).unwrap();
        assert!(
            (batch.value - truth).abs() < 0.1 * truth,
            "batch {} vs {truth}",
            batch.value
        );
    }

    #[test]
    fn replica_estimator_is_the_sample_variance() {
        let stats = [1.0, -1.0, 3.0, -3.0];
        let est = variance_replica(&stats).unwrap();
        assert!((est.value - sample_variance(&stats)).abs() < 1e-15);
    }

    #[test]
    fn clt_statistic_needs_k_values() {
        let params = CltParams {
            lambda: 0.25,
            tau: 0.01,
            k: 10,
            h: 0.0,
            k_burn: 0,
        };
        assert!(matches!(
            clt_statistic(&[0.0; 5], &params, 0.0),
            Err(SimError::InsufficientData { needed: 10, got: 5 })
        ));
    }

    #[test]
    fn truncating_inside_the_correlation_length_sets_the_tail_flag() {
        // Slowly mixing chain (a = 0.99) cut at lag 10: the retained
        // tail autocovariance is ~90% of lag zero, well above the 5%
        // threshold.
        let stream = NoiseStream::new(6, 0, PURPOSE_PATH);
        let mut xs = Vec::with_capacity(50_000);
        let mut x = 0.0;
        for i in 0..50_000u64 {
            x = 0.99 * x + stream.normal(i, 0);
            xs.push(x);
        }
        let est = variance_plugin(&xs, 1.0, Some(10)).unwrap();
        assert!(est.tail_suspect, "tail flag must fire: {est:?}");
    }

    #[test]
    fn negative_totals_clamp_with_flag() {
        // An alternating series has strongly negative lag-1
        // autocovariance; a lag-1 plugin sum goes negative.
        let xs: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let est = variance_plugin(&xs, 1.0, Some(1)).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.clamped);
    }

    #[test]
    fn rate_fit_on_iid_surrogate_recovers_inverse_time() {
        // Replica means of an i.i.d. sequence: MSE ∝ 1/k, slope ≈ −1
        // against t = k·τ.
        let replicas = 200u64;
        let k_grid = [100u64, 1000, 10_000];
        let tau = 1.0;
        let mut points = Vec::new();
        for &k in &k_grid {
            let mut acc = 0.0;
            for r in 0..replicas {
                let stream = NoiseStream::new(60 + r, 0, PURPOSE_PATH);
                let mean_k: f64 = (0..k).map(|i| stream.normal(i, 0)).sum::<f64>() / k as f64;
                acc += mean_k * mean_k;
            }
            points.push((k as f64 * tau, acc / replicas as f64));
        }
        let fit = rate_fit_from_mse(&points).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.15, "slope {}", fit.slope);
    }

    #[test]
    fn rate_fit_constant_series_against_biased_reference_is_flat() {
        // Constant trajectory vs a biased reference: MSE ≡ bias²,
        // slope ≈ 0 — the negative control.
        let points: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|&t| (t, 0.04)).collect();
        let fit = rate_fit_from_mse(&points).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn lln_rate_fit_validates_grid() {
        let spec = builtin_model(
            "ou",
            &Params::new()
                .set_num("theta", 1.0)
                .set_num("sigma", 1.0)
                .set_num("d", 1.0),
        )
        .unwrap();
        let dt = StepSize::temporal(0.01, 0.5).unwrap();
        let f = crate::functionals::builtin_functional("coordinate", Some(0), None).unwrap();
        // Spans only one decade: degenerate.
        let err = lln_rate_fit(&spec, SchemeKind::Bem, &dt, &f, &[100, 1000], 2, 1, 0.0);
        assert!(err.is_err());
    }
}
