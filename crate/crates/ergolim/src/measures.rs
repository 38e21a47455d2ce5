//! Empirical-measure utilities: moments, one-dimensional Wasserstein
//! distances via the sorted (quantile) coupling, exponential
//! mixing-rate fits, long-trajectory invariant-measure clouds, and the
//! closed-form oracles available for the linear test models.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::SimError;
use crate::models::{ModelKind, ModelSpec};
use crate::numutil::{line_fit, norm2};
use crate::rng::NoiseStream;
use crate::schemes::{step, NewtonConfig, PathState, SchemeKind, StateValue, StepSize};

/// Equal-weight sample cloud over vector states (scalars are length-1
/// vectors). Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    samples: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self, SimError> {
        if samples.is_empty() {
            return Err(SimError::InsufficientData { needed: 1, got: 0 });
        }
        let dim = samples[0].len();
        for s in &samples {
            if s.len() != dim {
                return Err(SimError::ShapeMismatch {
                    left: s.len(),
                    right: dim,
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(SimError::InvalidParam("non-finite sample entry".into()));
            }
        }
        Ok(EmpiricalMeasure { samples })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self, SimError> {
        EmpiricalMeasure::new(values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Scalar view; errors unless the samples are one-dimensional.
    pub fn scalars(&self) -> Result<Vec<f64>, SimError> {
        if self.dim() != 1 {
            return Err(SimError::ShapeMismatch {
                left: self.dim(),
                right: 1,
            });
        }
        Ok(self.samples.iter().map(|s| s[0]).collect())
    }

    /// Empirical moment: mean of ‖sample‖^order.
    pub fn moment(&self, order: f64) -> Result<f64, SimError> {
        if !(order >= 1.0) {
            return Err(SimError::InvalidParam(format!(
                "moment order must be ≥ 1, got {order}"
            )));
        }
        Ok(self
            .samples
            .iter()
            .map(|s| norm2(s).powf(order))
            .sum::<f64>()
            / self.len() as f64)
    }

    /// Images of the samples under a scalar functional, as a new cloud.
    pub fn pushforward(&self, f: impl Fn(&[f64]) -> f64) -> Result<EmpiricalMeasure, SimError> {
        EmpiricalMeasure::from_scalars(self.samples.iter().map(|s| f(s)).collect())
    }

    /// Dump a scalar cloud as single-column CSV.
    pub fn dump_csv(&self, path: &Path) -> Result<(), SimError> {
        let values = self.scalars()?;
        let mut file = std::fs::File::create(path)
            .map_err(|e| SimError::InvalidParam(format!("cannot create {path:?}: {e}")))?;
        for v in values {
            writeln!(file, "{v}")
                .map_err(|e| SimError::InvalidParam(format!("write failed: {e}")))?;
        }
        Ok(())
    }

    /// Load a scalar cloud from single-column CSV.
    pub fn load_csv(path: &Path) -> Result<EmpiricalMeasure, SimError> {
        let file = std::fs::File::open(path)
            .map_err(|e| SimError::InvalidParam(format!("cannot open {path:?}: {e}")))?;
        let mut values = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| SimError::InvalidParam(format!("read failed: {e}")))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            values.push(
                trimmed
                    .parse::<f64>()
                    .map_err(|e| SimError::InvalidParam(format!("bad number `{trimmed}`: {e}")))?,
            );
        }
        EmpiricalMeasure::from_scalars(values)
    }
}

fn sorted_scalars(m: &EmpiricalMeasure) -> Result<Vec<f64>, SimError> {
    let mut v = m.scalars()?;
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

/// Quadratic Wasserstein distance between two equal-size scalar clouds
/// via the sorted coupling (optimal in one dimension):
/// sqrt((1/n) Σ (x_(i) − y_(i))²).
pub fn wasserstein2_1d(m1: &EmpiricalMeasure, m2: &EmpiricalMeasure) -> Result<f64, SimError> {
    if m1.len() != m2.len() {
        return Err(SimError::ShapeMismatch {
            left: m1.len(),
            right: m2.len(),
        });
    }
    let a = sorted_scalars(m1)?;
    let b = sorted_scalars(m2)?;
    let n = a.len() as f64;
    Ok((a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
        .sqrt())
}

/// Bounded-Wasserstein distance with clamped cost:
/// (inf ∫ 1 ∧ ‖x − y‖^p dπ)^{1/p} on the sorted coupling.
pub fn bounded_wasserstein(
    m1: &EmpiricalMeasure,
    m2: &EmpiricalMeasure,
    p: f64,
) -> Result<f64, SimError> {
    if !(p >= 1.0) {
        return Err(SimError::InvalidParam(format!(
            "order must be ≥ 1, got {p}"
        )));
    }
    if m1.len() != m2.len() {
        return Err(SimError::ShapeMismatch {
            left: m1.len(),
            right: m2.len(),
        });
    }
    let a = sorted_scalars(m1)?;
    let b = sorted_scalars(m2)?;
    let n = a.len() as f64;
    let cost = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs().powf(p).min(1.0))
        .sum::<f64>()
        / n;
    Ok(cost.powf(1.0 / p))
}

/// Exponential mixing-rate fit from a decay table.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MixingFit {
    /// Fitted decay rate ĉ in D(t) ≈ D₀ e^{−ĉ t}.
    pub rate: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Least-squares fit of log D against t over the usable prefix of a
/// decay table: the fit stops at the 1e-8 noise floor or at the first
/// strict increase of D. A constant table fits rate 0 with R² = 1.
pub fn mixing_fit(decay: &[(f64, f64)]) -> Result<MixingFit, SimError> {
    const FLOOR: f64 = 1e-8;
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut last = f64::INFINITY;
    for &(t, d) in decay {
        if d <= FLOOR || d > last {
            break;
        }
        ts.push(t);
        logs.push(d.ln());
        last = d;
    }
    if ts.len() < 3 {
        return Err(SimError::InsufficientData {
            needed: 3,
            got: ts.len(),
        });
    }
    let fit = line_fit(&ts, &logs)?;
    Ok(MixingFit {
        rate: -fit.slope,
        r_squared: fit.r_squared,
        points_used: ts.len(),
    })
}

/// Initial state used by trajectory-based utilities: the zero vector
/// for finite-dimensional and spectral models, the declared initial
/// segment for delay models.
pub fn default_initial_state(spec: &ModelSpec, rng: NoiseStream) -> PathState {
    match &spec.kind {
        ModelKind::Sode(m) => PathState::vector(vec![0.0; m.dim], rng),
        ModelKind::Spde(m) => PathState::vector(vec![0.0; m.n_modes], rng),
        ModelKind::Sfde(m) => PathState::from_sfde_initial(m, rng),
    }
}

/// Long-trajectory approximation of the scheme's invariant measure:
/// run `k_total` steps from the default initial state, drop the first
/// `k_burn`, keep every `thinning`-th state thereafter. For delay
/// models the cloud collects the current value φ(0).
pub fn invariant_cloud(
    spec: &ModelSpec,
    scheme: SchemeKind,
    dt: &StepSize,
    k_total: u64,
    k_burn: u64,
    thinning: u64,
    seed: u64,
) -> Result<EmpiricalMeasure, SimError> {
    if k_total <= k_burn {
        return Err(SimError::InvalidParam(format!(
            "k_total = {k_total} must exceed k_burn = {k_burn}"
        )));
    }
    if thinning == 0 {
        return Err(SimError::InvalidParam("thinning must be ≥ 1".into()));
    }
    let rng = NoiseStream::new(seed, 0, crate::rng::PURPOSE_PATH);
    let cfg = NewtonConfig::default();
    let mut state = default_initial_state(spec, rng);
    let mut samples = Vec::new();
    for k in 1..=k_total {
        state = step(scheme, spec, &state, dt, &cfg)?;
        if k > k_burn && (k - k_burn) % thinning == 0 {
            match &state.value {
                StateValue::Vector(v) => samples.push(v.clone()),
                StateValue::Segment(s) => samples.push(s.head().to_vec()),
            }
        }
    }
    EmpiricalMeasure::new(samples)
}

/// Closed-form quantities for the linear (mean-reverting) test model
/// and its discretizations, used as test oracles throughout.
pub mod oracles {
    use crate::error::SimError;
    use crate::schemes::SchemeKind;

    /// Stationary variance of the exact process: σ²/(2θ).
    pub fn ou_stationary_variance(theta: f64, sigma: f64) -> f64 {
        sigma * sigma / (2.0 * theta)
    }

    /// Stationary variance of the drift-implicit Euler chain
    /// y⁺ = (y + σδW)/(1 + θτ): σ²/(2θ + θ²τ).
    pub fn bem_ou_stationary_variance(theta: f64, sigma: f64, tau: f64) -> f64 {
        sigma * sigma / (2.0 * theta + theta * theta * tau)
    }

    /// Stationary variance of the explicit Euler chain
    /// y⁺ = (1 − θτ)y + σδW: σ²/(2θ − θ²τ), defined for τ < 2/θ.
    pub fn em_ou_stationary_variance(theta: f64, sigma: f64, tau: f64) -> Result<f64, SimError> {
        if tau * theta >= 2.0 {
            return Err(SimError::InvalidParam(format!(
                "explicit chain is unstable at θτ = {} ≥ 2",
                theta * tau
            )));
        }
        Ok(sigma * sigma / (2.0 * theta - theta * theta * tau))
    }

    /// Stationary variance of the scheme-discretized chain, when the
    /// scheme has one in closed form.
    pub fn scheme_ou_stationary_variance(
        scheme: SchemeKind,
        theta: f64,
        sigma: f64,
        tau: f64,
    ) -> Option<f64> {
        match scheme {
            SchemeKind::Bem => Some(bem_ou_stationary_variance(theta, sigma, tau)),
            SchemeKind::Em => em_ou_stationary_variance(theta, sigma, tau).ok(),
            _ => None,
        }
    }

    /// Exact transition over one step: x⁺ = decay·x + noise_std·ξ.
    pub fn ou_exact_transition(theta: f64, sigma: f64, tau: f64) -> (f64, f64) {
        let decay = (-theta * tau).exp();
        let noise_std = sigma * ((1.0 - (-2.0 * theta * tau).exp()) / (2.0 * theta)).sqrt();
        (decay, noise_std)
    }

    /// Asymptotic variance of time averages of the identity
    /// functional: v² = σ²/θ². The integrated-autocovariance sum of
    /// both Euler chains reproduces this value exactly at every step
    /// size (geometric series: τ·V·(1+a)/(1−a) with a the one-step
    /// autocorrelation).
    pub fn ou_asymptotic_variance_coordinate(theta: f64, sigma: f64) -> f64 {
        (sigma / theta) * (sigma / theta)
    }

    /// Asymptotic variance of time averages of x ↦ x²: v² = σ⁴/(2θ³).
    pub fn ou_asymptotic_variance_square(theta: f64, sigma: f64) -> f64 {
        sigma.powi(4) / (2.0 * theta.powi(3))
    }

    /// Asymptotic variance of the scheme chain for x ↦ x²:
    /// 2τ·V²·(1+a²)/(1−a²) with the chain's stationary variance V and
    /// one-step autocorrelation a (squared-Gaussian autocovariance
    /// c_j = 2V²a^{2j}).
    pub fn scheme_ou_asymptotic_variance_square(
        scheme: SchemeKind,
        theta: f64,
        sigma: f64,
        tau: f64,
    ) -> Option<f64> {
        let v = scheme_ou_stationary_variance(scheme, theta, sigma, tau)?;
        let a = match scheme {
            SchemeKind::Bem => 1.0 / (1.0 + theta * tau),
            SchemeKind::Em => 1.0 - theta * tau,
            _ => return None,
        };
        let a2 = a * a;
        Some(2.0 * tau * v * v * (1.0 + a2) / (1.0 - a2))
    }

    /// Zero-frequency (long-run) variance of the stationary linear
    /// delay equation dx = (−a·x(t) + b·x(t−δ₀))dt + σ dW for the
    /// identity functional: σ²/(a−b)², from the transfer function at
    /// frequency zero. The Euler chain preserves the zero-frequency
    /// gain, so the same value applies at every step size.
    pub fn linear_delay_asymptotic_variance(a: f64, b: f64, sigma: f64) -> Result<f64, SimError> {
        if a <= b {
            return Err(SimError::InvalidParam(format!(
                "stationarity requires a > b, got a = {a}, b = {b}"
            )));
        }
        Ok(sigma * sigma / ((a - b) * (a - b)))
    }

    /// Per-step contraction rate of the coupled drift-implicit chain
    /// on the linear model: ln(1 + θτ)/τ.
    pub fn bem_ou_mixing_rate(theta: f64, tau: f64) -> f64 {
        (1.0 + theta * tau).ln() / tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_model, Params};
    use crate::rng::PURPOSE_PATH;

    #[test]
    fn moments_of_simple_clouds() {
        let m = EmpiricalMeasure::from_scalars(vec![1.0, -1.0]).unwrap();
        assert_eq!(m.moment(2.0).unwrap(), 1.0);
        let z = EmpiricalMeasure::from_scalars(vec![0.0]).unwrap();
        assert_eq!(z.moment(7.0).unwrap(), 0.0);
    }

    #[test]
    fn moment_is_monotone_in_order_for_large_norms() {
        // On clouds whose norms all exceed 1, higher order means a
        // larger moment.
        let stream = NoiseStream::new(3, 0, PURPOSE_PATH);
        let cloud = EmpiricalMeasure::from_scalars(
            (0..500).map(|i| 1.0 + stream.uniform(i, 0) * 4.0).collect(),
        )
        .unwrap();
        let mut last = 0.0;
        for &q in &[1.0, 2.0, 3.0, 5.0] {
            let m = cloud.moment(q).unwrap();
            assert!(m >= last, "order {q}");
            last = m;
        }
    }

    #[test]
    fn wasserstein_identical_and_singleton() {
        let a = EmpiricalMeasure::from_scalars(vec![0.0, 1.0]).unwrap();
        assert_eq!(wasserstein2_1d(&a, &a).unwrap(), 0.0);
        let x = EmpiricalMeasure::from_scalars(vec![0.0]).unwrap();
        let y = EmpiricalMeasure::from_scalars(vec![1.0]).unwrap();
        assert_eq!(wasserstein2_1d(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn wasserstein_sorted_coupling_beats_the_crossing() {
        // {0,2} vs {1,3}: sorted pairing costs √((1+1)/2) = 1, the
        // crossed pairing √((9+1)/2) = √5 — brute force over both.
        let a = EmpiricalMeasure::from_scalars(vec![0.0, 2.0]).unwrap();
        let b = EmpiricalMeasure::from_scalars(vec![1.0, 3.0]).unwrap();
        let got = wasserstein2_1d(&a, &b).unwrap();
        let sorted_cost = ((1.0f64 + 1.0) / 2.0).sqrt();
        let crossed_cost = ((9.0f64 + 1.0) / 2.0).sqrt();
        assert_eq!(got, sorted_cost.min(crossed_cost));
        assert!((got - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_triangle_inequality_on_random_triples() {
        let stream = NoiseStream::new(17, 0, PURPOSE_PATH);
        for trial in 0..50u64 {
            let n = 16;
            let gen = |c: u64| -> EmpiricalMeasure {
                EmpiricalMeasure::from_scalars(
                    (0..n)
                        .map(|i| 3.0 * stream.normal(trial * 64 + i, c))
                        .collect(),
                )
                .unwrap()
            };
            let (a, b, c) = (gen(0), gen(1), gen(2));
            let ab = wasserstein2_1d(&a, &b).unwrap();
            let bc = wasserstein2_1d(&b, &c).unwrap();
            let ac = wasserstein2_1d(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12, "trial {trial}: {ac} > {ab} + {bc}");
        }
    }

    #[test]
    fn wasserstein_shift_is_exact() {
        // Against a shifted copy x + c the distance is exactly |c|
        // (dyadic values keep the arithmetic exact).
        let base: Vec<f64> = (0..64).map(|i| (i as f64) * 0.25 - 8.0).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.5).collect();
        let a = EmpiricalMeasure::from_scalars(base).unwrap();
        let b = EmpiricalMeasure::from_scalars(shifted).unwrap();
        assert_eq!(wasserstein2_1d(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn bounded_wasserstein_clamps() {
        let x = EmpiricalMeasure::from_scalars(vec![0.0]).unwrap();
        let y = EmpiricalMeasure::from_scalars(vec![10.0]).unwrap();
        assert_eq!(bounded_wasserstein(&x, &y, 2.0).unwrap(), 1.0);
        let a = EmpiricalMeasure::from_scalars(vec![0.0, 1.0]).unwrap();
        assert_eq!(bounded_wasserstein(&a, &a, 2.0).unwrap(), 0.0);
        // {0,0} vs {0.5,10}: both pairings cost (0.25 + 1)/2.
        let c = EmpiricalMeasure::from_scalars(vec![0.0, 0.0]).unwrap();
        let d = EmpiricalMeasure::from_scalars(vec![0.5, 10.0]).unwrap();
        let got = bounded_wasserstein(&c, &d, 2.0).unwrap();
        assert!((got - (1.25f64 / 2.0).sqrt()).abs() < 1e-12);
        assert!((got - 0.7906).abs() < 1e-4);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let a = EmpiricalMeasure::from_scalars(vec![0.0, 1.0]).unwrap();
        let b = EmpiricalMeasure::from_scalars(vec![0.0]).unwrap();
        assert!(matches!(
            wasserstein2_1d(&a, &b),
            Err(SimError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn mixing_fit_recovers_exact_exponential() {
        let table: Vec<(f64, f64)> = (0..40)
            .map(|k| (k as f64 * 0.1, (-2.0 * k as f64 * 0.1).exp()))
            .collect();
        let fit = mixing_fit(&table).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixing_fit_constant_table_gives_zero_rate() {
        let table: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 0.3)).collect();
        let fit = mixing_fit(&table).unwrap();
        assert_eq!(fit.rate, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn mixing_fit_stops_at_noise_floor_and_increases() {
        let mut table: Vec<(f64, f64)> = (0..30)
            .map(|k| (k as f64 * 0.5, (-(k as f64) * 0.5).exp()))
            .collect();
        table.push((15.0, 1e-9)); // below floor
        table.push((15.5, 5.0)); // bounce
        let fit = mixing_fit(&table).unwrap();
        assert_eq!(fit.points_used, 30);
        assert!((fit.rate - 1.0).abs() < 1e-9);
        // Fewer than 3 usable points errors out.
        assert!(mixing_fit(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn invariant_cloud_boundary_thinning_yields_single_sample() {
        let spec = builtin_model(
            "ou",
            &Params::new()
                .set_num("theta", 1.0)
                .set_num("sigma", 1.0)
                .set_num("d", 1.0),
        )
        .unwrap();
        let dt = StepSize::temporal(0.05, 0.5).unwrap();
        let cloud = invariant_cloud(&spec, SchemeKind::Bem, &dt, 100, 20, 80, 1).unwrap();
        assert_eq!(cloud.len(), 1);
    }

    #[test]
    fn invariant_cloud_of_frozen_dynamics_is_all_zeros() {
        // σ ≡ 0 and b(0) = 0 from x = 0: every state stays at zero.
        let spec = builtin_model(
            "ou",
            &Params::new()
                .set_num("theta", 1.0)
                .set_num("sigma", 0.0)
                .set_num("d", 1.0),
        )
        .unwrap();
        let dt = StepSize::temporal(0.05, 0.5).unwrap();
        let cloud = invariant_cloud(&spec, SchemeKind::Bem, &dt, 50, 0, 1, 1).unwrap();
        assert_eq!(cloud.len(), 50);
        assert!(cloud.samples().iter().all(|s| s[0] == 0.0));
    }

    #[test]
    fn bem_cloud_matches_its_stationary_variance() {
        // Long drift-implicit chain at τ = 0.01: second moment within
        // the closed-form value's Monte Carlo band.
        let spec = builtin_model(
            "ou",
            &Params::new()
                .set_num("theta", 1.0)
                .set_num("sigma", 1.0)
                .set_num("d", 1.0),
        )
        .unwrap();
        let dt = StepSize::temporal(0.01, 0.5).unwrap();
        let cloud = invariant_cloud(&spec, SchemeKind::Bem, &dt, 200_000, 10_000, 1, 42).unwrap();
        let m2 = cloud.moment(2.0).unwrap();
        let expect = oracles::bem_ou_stationary_variance(1.0, 1.0, 0.01);
        assert!((m2 - expect).abs() < 0.01, "m2 = {m2}, oracle = {expect}");
    }

    #[test]
    fn pushforward_makes_multivariate_clouds_scalar() {
        // Wasserstein queries need scalar clouds; vector states go
        // through a functional first.
        let cloud = EmpiricalMeasure::new(vec![vec![3.0, 4.0], vec![0.0, 1.0]]).unwrap();
        assert!(wasserstein2_1d(&cloud, &cloud).is_err());
        let pushed = cloud
            .pushforward(|s| s.iter().map(|v| v * v).sum())
            .unwrap();
        assert_eq!(pushed.scalars().unwrap(), vec![25.0, 1.0]);
        assert_eq!(wasserstein2_1d(&pushed, &pushed).unwrap(), 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        let dir = std::env::temp_dir().join("ergolim_cloud_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.csv");
        let m = EmpiricalMeasure::from_scalars(vec![0.5, -1.25, 3.0]).unwrap();
        m.dump_csv(&path).unwrap();
        let back = EmpiricalMeasure::load_csv(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn oracle_identities() {
        assert!((oracles::ou_stationary_variance(1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((oracles::bem_ou_stationary_variance(1.0, 1.0, 0.01) - 1.0 / 2.01).abs() < 1e-15);
        assert!((oracles::ou_asymptotic_variance_coordinate(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((oracles::ou_asymptotic_variance_square(1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(
            (oracles::linear_delay_asymptotic_variance(2.0, 0.5, 0.3).unwrap() - 0.04).abs()
                < 1e-15
        );
        assert!((oracles::bem_ou_mixing_rate(1.0, 0.01) - 0.995033).abs() < 1e-6);
    }
}
