//! One-step maps for the three model families, plus coupled
//! two-trajectory stepping with shared noise.
//!
//! Implicit steps (drift-implicit Euler for SDEs, linear-implicit-plus-
//! Newton for the spectral models) solve their fixed-point equations to
//! a configurable residual tolerance, starting from the explicit Euler
//! predictor. All schemes detect overflow (any entry above 1e10 or
//! non-finite) and report it as an error instead of propagating NaNs:
//! explicit schemes on superlinear drifts are expected to blow up at
//! coarse steps, and that failure mode is part of the test surface.
//!
//! Noise discipline: every scheme consumes raw standard normals from
//! the counter-based stream carried inside the state, addressed by
//! `(step, component)`. Variants with a `_values` suffix take explicit
//! Brownian increments instead, which is what the strong-order checks
//! use to share one fine-grid noise realization across resolutions.

use std::io::Write;

use crate::error::SimError;
use crate::models::{
    ModelKind, ModelSpec, SfdeModel, SodeModel, SpectralSpdeModel, OVERFLOW_LIMIT,
};
use crate::numutil::{norm2, solve_in_place};
use crate::rng::NoiseStream;

/// Discretization parameters: spatial step `h` (0 when the model has no
/// spatial direction), temporal step `τ`, and the convergence exponents
/// α = (α₁, α₂) through which they couple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    pub h: f64,
    pub tau: f64,
    pub alpha: (f64, f64),
}

impl StepSize {
    pub fn new(h: f64, tau: f64, alpha: (f64, f64)) -> Result<Self, SimError> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(SimError::InvalidParam(format!(
                "tau must lie in (0,1], got {tau}"
            )));
        }
        if !(0.0..=1.0).contains(&h) {
            return Err(SimError::InvalidParam(format!(
                "h must lie in [0,1], got {h}"
            )));
        }
        let s = StepSize { h, tau, alpha };
        if !s.delta_alpha().is_finite() {
            return Err(SimError::InvalidParam("non-finite |Δ^α|".into()));
        }
        Ok(s)
    }

    /// Temporal-only step.
    pub fn temporal(tau: f64, alpha2: f64) -> Result<Self, SimError> {
        StepSize::new(0.0, tau, (1.0, alpha2))
    }

    /// The combined convergence scale |Δ^α| = h^{α₁} + τ^{α₂}.
    pub fn delta_alpha(&self) -> f64 {
        self.h.powf(self.alpha.0) + self.tau.powf(self.alpha.1)
    }
}

/// Segment state of a delay model: node `i` holds the value at
/// θ = −δ₀ + i·τ, node `n_seg` being the current value φ(0).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentState {
    pub dim: usize,
    pub n_seg: usize,
    pub delay: f64,
    pub values: Vec<f64>,
}

impl SegmentState {
    pub fn view(&self) -> crate::models::SegmentNodes<'_> {
        crate::models::SegmentNodes {
            dim: self.dim,
            n_seg: self.n_seg,
            delay: self.delay,
            values: &self.values,
        }
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn head(&self) -> &[f64] {
        self.node(self.n_seg)
    }

    fn tau(&self) -> f64 {
        self.delay / self.n_seg as f64
    }

    /// Linear interpolation at lookback time θ ∈ [−δ₀, 0]; exact at
    /// grid nodes.
    pub fn eval(&self, theta: f64) -> Result<Vec<f64>, SimError> {
        let tau = self.tau();
        let eps = 1e-12 * self.delay.max(1.0);
        if theta < -self.delay - eps || theta > eps {
            return Err(SimError::OutOfWindow {
                theta,
                delay: self.delay,
            });
        }
        let theta = theta.clamp(-self.delay, 0.0);
        let pos = (theta + self.delay) / tau;
        // Snap to the nearest node when θ is a grid point up to
        // roundoff, so node queries return stored values exactly.
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            let i = (nearest as usize).min(self.n_seg);
            return Ok(self.node(i).to_vec());
        }
        let cell = (pos.floor() as usize).min(self.n_seg - 1);
        let frac = pos - cell as f64;
        let left = self.node(cell);
        let right = self.node(cell + 1);
        Ok(left
            .iter()
            .zip(right)
            .map(|(a, b)| (1.0 - frac) * a + frac * b)
            .collect())
    }
}

/// State of one discretized trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum StateValue {
    Vector(Vec<f64>),
    Segment(SegmentState),
}

impl StateValue {
    /// State-space norm: Euclidean for vectors, sup over nodes of the
    /// per-node Euclidean norm for segments.
    pub fn norm(&self) -> f64 {
        match self {
            StateValue::Vector(v) => norm2(v),
            StateValue::Segment(s) => {
                let mut best = 0.0f64;
                for i in 0..=s.n_seg {
                    best = best.max(norm2(s.node(i)));
                }
                best
            }
        }
    }

    /// Distance in the state norm; errors on shape mismatch.
    pub fn distance(&self, other: &StateValue) -> Result<f64, SimError> {
        match (self, other) {
            (StateValue::Vector(a), StateValue::Vector(b)) => {
                if a.len() != b.len() {
                    return Err(SimError::ShapeMismatch {
                        left: a.len(),
                        right: b.len(),
                    });
                }
                Ok(a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt())
            }
            (StateValue::Segment(a), StateValue::Segment(b)) => {
                if a.values.len() != b.values.len() {
                    return Err(SimError::ShapeMismatch {
                        left: a.values.len(),
                        right: b.values.len(),
                    });
                }
                let mut best = 0.0f64;
                for i in 0..=a.n_seg {
                    let d: f64 = a
                        .node(i)
                        .iter()
                        .zip(b.node(i))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    best = best.max(d);
                }
                Ok(best.sqrt())
            }
            (a, b) => Err(SimError::ShapeMismatch {
                left: matches!(a, StateValue::Vector(_)) as usize,
                right: matches!(b, StateValue::Vector(_)) as usize,
            }),
        }
    }
}

/// Trajectory state: step counter, physical time, state value, and the
/// noise stream the trajectory draws from.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub step: u64,
    pub time: f64,
    pub value: StateValue,
    pub rng: NoiseStream,
}

impl PathState {
    pub fn vector(values: Vec<f64>, rng: NoiseStream) -> Self {
        PathState {
            step: 0,
            time: 0.0,
            value: StateValue::Vector(values),
            rng,
        }
    }

    /// Initial segment state of a delay model.
    pub fn from_sfde_initial(model: &SfdeModel, rng: NoiseStream) -> Self {
        PathState {
            step: 0,
            time: 0.0,
            value: StateValue::Segment(SegmentState {
                dim: model.dim,
                n_seg: model.n_seg,
                delay: model.delay,
                values: model.initial_segment.clone(),
            }),
            rng,
        }
    }
}

/// Controls for the implicit solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub max_iter: u32,
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-12,
            max_iter: 50,
            damping: 1.0,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.abs_tol > 0.0) {
            return Err(SimError::InvalidParam(
                "newton abs_tol must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(SimError::InvalidParam("newton max_iter must be ≥ 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SimError::InvalidParam(
                "newton damping must lie in (0,1]".into(),
            ));
        }
        Ok(())
    }
}

/// Scheme selector, matching the names used in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Bem,
    Em,
    SpdeExpEuler,
    SpdeBem,
    SfdeEm,
}

impl SchemeKind {
    pub fn parse(name: &str) -> Option<SchemeKind> {
        match name {
            "bem" => Some(SchemeKind::Bem),
            "em" => Some(SchemeKind::Em),
            "spde_expeuler" => Some(SchemeKind::SpdeExpEuler),
            "spde_bem" => Some(SchemeKind::SpdeBem),
            "sfde_em" => Some(SchemeKind::SfdeEm),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Bem => "bem",
            SchemeKind::Em => "em",
            SchemeKind::SpdeExpEuler => "spde_expeuler",
            SchemeKind::SpdeBem => "spde_bem",
            SchemeKind::SfdeEm => "sfde_em",
        }
    }

    pub fn compatible_family(&self) -> &'static str {
        match self {
            SchemeKind::Bem | SchemeKind::Em => "sode",
            SchemeKind::SpdeExpEuler | SchemeKind::SpdeBem => "spde",
            SchemeKind::SfdeEm => "sfde",
        }
    }

    /// Whether this scheme involves an implicit solve.
    pub fn is_implicit(&self) -> bool {
        matches!(self, SchemeKind::Bem | SchemeKind::SpdeBem)
    }
}

fn check_finite(step: u64, values: &[f64]) -> Result<(), SimError> {
    for &v in values {
        if !v.is_finite() || v.abs() > OVERFLOW_LIMIT {
            return Err(SimError::OverflowDetected { step, value: v });
        }
    }
    Ok(())
}

fn expect_vector(state: &PathState) -> Result<&Vec<f64>, SimError> {
    match &state.value {
        StateValue::Vector(v) => Ok(v),
        StateValue::Segment(_) => Err(SimError::SchemeModelMismatch {
            scheme: "vector scheme".into(),
            model: "segment state".into(),
        }),
    }
}

fn expect_segment(state: &PathState) -> Result<&SegmentState, SimError> {
    match &state.value {
        StateValue::Segment(s) => Ok(s),
        StateValue::Vector(_) => Err(SimError::SchemeModelMismatch {
            scheme: "segment scheme".into(),
            model: "vector state".into(),
        }),
    }
}

/// Generic damped Newton iteration on `residual(y) = 0`.
///
/// `jacobian` fills the row-major matrix at the current iterate. The
/// step is damped by backtracking when the full update fails to reduce
/// the residual norm.
fn newton_iterate(
    y: &mut [f64],
    cfg: &NewtonConfig,
    mut residual: impl FnMut(&[f64], &mut [f64]),
    mut jacobian: impl FnMut(&[f64], &mut [f64]),
) -> Result<(f64, u32), SimError> {
    cfg.validate()?;
    let n = y.len();
    let mut g = vec![0.0; n];
    let mut jac = vec![0.0; n * n];
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    residual(y, &mut g);
    let mut rn = norm2(&g);
    for iter in 0..cfg.max_iter {
        if !rn.is_finite() {
            return Err(SimError::NewtonDivergence {
                iters: iter,
                residual: rn,
            });
        }
        if rn <= cfg.abs_tol {
            return Ok((rn, iter));
        }
        jacobian(y, &mut jac);
        let mut delta = g.clone();
        let mut jac_copy = jac.clone();
        solve_in_place(&mut jac_copy, &mut delta)?;
        let mut scale = cfg.damping;
        let mut accepted = false;
        for _ in 0..30 {
            for i in 0..n {
                trial[i] = y[i] - scale * delta[i];
            }
            residual(&trial, &mut g_trial);
            let rn_trial = norm2(&g_trial);
            if rn_trial.is_finite() && rn_trial < rn {
                y.copy_from_slice(&trial);
                g.copy_from_slice(&g_trial);
                rn = rn_trial;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(SimError::NewtonDivergence {
                iters: iter + 1,
                residual: rn,
            });
        }
    }
    if rn <= cfg.abs_tol {
        Ok((rn, cfg.max_iter))
    } else {
        Err(SimError::NewtonDivergence {
            iters: cfg.max_iter,
            residual: rn,
        })
    }
}

// ---------------------------------------------------------------------------
// SODE steppers
// ---------------------------------------------------------------------------

/// Drift-implicit Euler update from explicit increments:
/// solves y = x + b(y)·τ + σ(x)·δW.
pub fn bem_values(
    model: &SodeModel,
    x: &[f64],
    tau: f64,
    dw: &[f64],
    cfg: &NewtonConfig,
) -> Result<Vec<f64>, SimError> {
    let d = model.dim;
    let mut rhs = x.to_vec();
    add_diffusion(model, x, dw, &mut rhs)?;
    // Explicit predictor: x + τ·b(x) + σ(x)·δW.
    let mut y = rhs.clone();
    let mut bx = vec![0.0; d];
    model.drift(x, &mut bx);
    for i in 0..d {
        y[i] += tau * bx[i];
    }
    let mut b_buf = vec![0.0; d];
    newton_iterate(
        &mut y,
        cfg,
        |y, g| {
            model.drift(y, &mut b_buf);
            for i in 0..d {
                g[i] = y[i] - tau * b_buf[i] - rhs[i];
            }
        },
        |y, jac| {
            model.drift_jacobian(y, jac);
            for v in jac.iter_mut() {
                *v *= -tau;
            }
            for i in 0..d {
                jac[i * d + i] += 1.0;
            }
        },
    )?;
    Ok(y)
}

/// Explicit Euler update from explicit increments.
pub fn em_sode_values(
    model: &SodeModel,
    x: &[f64],
    tau: f64,
    dw: &[f64],
) -> Result<Vec<f64>, SimError> {
    let d = model.dim;
    let mut y = x.to_vec();
    let mut bx = vec![0.0; d];
    model.drift(x, &mut bx);
    for i in 0..d {
        y[i] += tau * bx[i];
    }
    add_diffusion(model, x, dw, &mut y)?;
    Ok(y)
}

fn add_diffusion(
    model: &SodeModel,
    x: &[f64],
    dw: &[f64],
    out: &mut [f64],
) -> Result<(), SimError> {
    if dw.len() != model.noise_dim {
        return Err(SimError::ShapeMismatch {
            left: dw.len(),
            right: model.noise_dim,
        });
    }
    let d = model.dim;
    let mut sigma = vec![0.0; d * model.noise_dim];
    model.diffusion(x, &mut sigma);
    for i in 0..d {
        for j in 0..model.noise_dim {
            out[i] += sigma[i * model.noise_dim + j] * dw[j];
        }
    }
    Ok(())
}

fn draw_increments(rng: &NoiseStream, step: u64, count: usize, tau: f64) -> Vec<f64> {
    let sqrt_tau = tau.sqrt();
    (0..count)
        .map(|j| sqrt_tau * rng.normal(step, j as u64))
        .collect()
}

/// Drift-implicit Euler step of a finite-dimensional model; increments
/// are drawn from the state's noise stream as independent N(0, τ).
pub fn bem_step(
    model: &SodeModel,
    state: &PathState,
    dt: &StepSize,
    cfg: &NewtonConfig,
) -> Result<PathState, SimError> {
    let x = expect_vector(state)?;
    let dw = draw_increments(&state.rng, state.step, model.noise_dim, dt.tau);
    let y = bem_values(model, x, dt.tau, &dw, cfg)?;
    check_finite(state.step + 1, &y)?;
    Ok(PathState {
        step: state.step + 1,
        time: (state.step + 1) as f64 * dt.tau,
        value: StateValue::Vector(y),
        rng: state.rng,
    })
}

/// Explicit Euler step of a finite-dimensional model.
pub fn em_step_sode(
    model: &SodeModel,
    state: &PathState,
    dt: &StepSize,
) -> Result<PathState, SimError> {
    let x = expect_vector(state)?;
    let dw = draw_increments(&state.rng, state.step, model.noise_dim, dt.tau);
    let y = em_sode_values(model, x, dt.tau, &dw)?;
    check_finite(state.step + 1, &y)?;
    Ok(PathState {
        step: state.step + 1,
        time: (state.step + 1) as f64 * dt.tau,
        value: StateValue::Vector(y),
        rng: state.rng,
    })
}

// ---------------------------------------------------------------------------
// Delay steppers
// ---------------------------------------------------------------------------

/// Explicit Euler update of a segment state from explicit increments:
/// appends y(t_{k+1}) = φ(0) + b(Y)τ + σ(Y)δW and shifts the window by
/// one node.
pub fn em_sfde_values(
    model: &SfdeModel,
    seg: &SegmentState,
    tau: f64,
    dw: &[f64],
) -> Result<SegmentState, SimError> {
    let model_tau = model.segment_tau();
    if (tau - model_tau).abs() > 1e-12 * model_tau {
        return Err(SimError::InvalidParam(format!(
            "delay stepper needs tau = δ₀/n_seg = {model_tau}, got {tau}"
        )));
    }
    if dw.len() != model.noise_dim {
        return Err(SimError::ShapeMismatch {
            left: dw.len(),
            right: model.noise_dim,
        });
    }
    let d = model.dim;
    let view = seg.view();
    let mut drift = vec![0.0; d];
    model.drift_eval(&view, &mut drift);
    let mut sigma = vec![0.0; d * model.noise_dim];
    model.diffusion_eval(&view, &mut sigma);
    let head = seg.head();
    let mut new_head = vec![0.0; d];
    for i in 0..d {
        let mut v = head[i] + tau * drift[i];
        for j in 0..model.noise_dim {
            v += sigma[i * model.noise_dim + j] * dw[j];
        }
        new_head[i] = v;
    }
    let mut values = seg.values[d..].to_vec();
    values.extend_from_slice(&new_head);
    Ok(SegmentState {
        dim: d,
        n_seg: seg.n_seg,
        delay: seg.delay,
        values,
    })
}

/// Explicit Euler step of a delay model.
pub fn em_step_sfde(
    model: &SfdeModel,
    state: &PathState,
    dt: &StepSize,
) -> Result<PathState, SimError> {
    let seg = expect_segment(state)?;
    let dw = draw_increments(&state.rng, state.step, model.noise_dim, dt.tau);
    let next = em_sfde_values(model, seg, dt.tau, &dw)?;
    check_finite(state.step + 1, &next.values)?;
    Ok(PathState {
        step: state.step + 1,
        time: (state.step + 1) as f64 * dt.tau,
        value: StateValue::Segment(next),
        rng: state.rng,
    })
}

/// Explicit Euler step dispatching on the model family (finite
/// dimensional or delay).
pub fn em_step(spec: &ModelSpec, state: &PathState, dt: &StepSize) -> Result<PathState, SimError> {
    match &spec.kind {
        ModelKind::Sode(m) => em_step_sode(m, state, dt),
        ModelKind::Sfde(m) => em_step_sfde(m, state, dt),
        ModelKind::Spde(_) => Err(SimError::SchemeModelMismatch {
            scheme: "em".into(),
            model: "spde".into(),
        }),
    }
}

/// Linear interpolation of a segment state at lookback time
/// θ ∈ [−δ₀, 0]: exact at grid nodes, linear between them.
pub fn segment_eval(state: &PathState, theta: f64) -> Result<Vec<f64>, SimError> {
    expect_segment(state)?.eval(theta)
}

// ---------------------------------------------------------------------------
// Spectral steppers
// ---------------------------------------------------------------------------

fn draw_mode_increments(
    model: &SpectralSpdeModel,
    rng: &NoiseStream,
    step: u64,
    tau: f64,
) -> Vec<f64> {
    (0..model.n_modes)
        .map(|j| (model.noise_weights[j] * tau).sqrt() * rng.normal(step, j as u64))
        .collect()
}

/// Exponential-Euler update from explicit per-mode increments:
/// y_j ← e^{−λ_j τ} (y_j + F_j(Y)τ + δW_j).
pub fn spde_expeuler_values(
    model: &SpectralSpdeModel,
    y: &[f64],
    tau: f64,
    dw: &[f64],
) -> Result<Vec<f64>, SimError> {
    let n = model.n_modes;
    if y.len() != n || dw.len() != n {
        return Err(SimError::ShapeMismatch {
            left: y.len(),
            right: n,
        });
    }
    let mut f_modes = vec![0.0; n];
    model.nonlinearity_modes(y, &mut f_modes);
    let mut out = vec![0.0; n];
    for j in 0..n {
        out[j] = (-model.eigenvalues[j] * tau).exp() * (y[j] + f_modes[j] * tau + dw[j]);
    }
    Ok(out)
}

/// Exponential-Euler step of a spectral model.
pub fn spde_expeuler_step(
    model: &SpectralSpdeModel,
    state: &PathState,
    dt: &StepSize,
) -> Result<PathState, SimError> {
    let y = expect_vector(state)?;
    let dw = draw_mode_increments(model, &state.rng, state.step, dt.tau);
    let out = spde_expeuler_values(model, y, dt.tau, &dw)?;
    check_finite(state.step + 1, &out)?;
    Ok(PathState {
        step: state.step + 1,
        time: (state.step + 1) as f64 * dt.tau,
        value: StateValue::Vector(out),
        rng: state.rng,
    })
}

/// Linear-implicit step with Newton on the nonlinearity:
/// solves (1 + τλ_j) y_j − τ F_j(Y) = x_j + δW_j over all modes.
pub fn spde_bem_values(
    model: &SpectralSpdeModel,
    x: &[f64],
    tau: f64,
    dw: &[f64],
    cfg: &NewtonConfig,
) -> Result<Vec<f64>, SimError> {
    let n = model.n_modes;
    if x.len() != n || dw.len() != n {
        return Err(SimError::ShapeMismatch {
            left: x.len(),
            right: n,
        });
    }
    let rhs: Vec<f64> = (0..n).map(|j| x[j] + dw[j]).collect();
    if !model.has_nonlinearity() {
        // Pure diagonal solve.
        return Ok((0..n)
            .map(|j| rhs[j] / (1.0 + tau * model.eigenvalues[j]))
            .collect());
    }
    // Predictor: semi-implicit (exact in the linear part, explicit in F).
    let mut f_buf = vec![0.0; n];
    model.nonlinearity_modes(x, &mut f_buf);
    let mut y: Vec<f64> = (0..n)
        .map(|j| (rhs[j] + tau * f_buf[j]) / (1.0 + tau * model.eigenvalues[j]))
        .collect();
    newton_iterate(
        &mut y,
        cfg,
        |y, g| {
            model.nonlinearity_modes(y, &mut f_buf);
            for j in 0..n {
                g[j] = (1.0 + tau * model.eigenvalues[j]) * y[j] - tau * f_buf[j] - rhs[j];
            }
        },
        |y, jac| {
            model.nonlinearity_jacobian(y, jac);
            for v in jac.iter_mut() {
                *v *= -tau;
            }
            for j in 0..n {
                jac[j * n + j] += 1.0 + tau * model.eigenvalues[j];
            }
        },
    )?;
    Ok(y)
}

/// Linear-implicit (drift-implicit) step of a spectral model.
pub fn spde_bem_step(
    model: &SpectralSpdeModel,
    state: &PathState,
    dt: &StepSize,
    cfg: &NewtonConfig,
) -> Result<PathState, SimError> {
    let y = expect_vector(state)?;
    let dw = draw_mode_increments(model, &state.rng, state.step, dt.tau);
    let out = spde_bem_values(model, y, dt.tau, &dw, cfg)?;
    check_finite(state.step + 1, &out)?;
    Ok(PathState {
        step: state.step + 1,
        time: (state.step + 1) as f64 * dt.tau,
        value: StateValue::Vector(out),
        rng: state.rng,
    })
}

// ---------------------------------------------------------------------------
// Dispatch and coupling
// ---------------------------------------------------------------------------

/// Advance one step with the named scheme, drawing noise from the
/// state's stream. Checks model/scheme compatibility.
pub fn step(
    kind: SchemeKind,
    spec: &ModelSpec,
    state: &PathState,
    dt: &StepSize,
    cfg: &NewtonConfig,
) -> Result<PathState, SimError> {
    match (kind, &spec.kind) {
        (SchemeKind::Bem, ModelKind::Sode(m)) => bem_step(m, state, dt, cfg),
        (SchemeKind::Em, ModelKind::Sode(m)) => em_step_sode(m, state, dt),
        (SchemeKind::SpdeExpEuler, ModelKind::Spde(m)) => spde_expeuler_step(m, state, dt),
        (SchemeKind::SpdeBem, ModelKind::Spde(m)) => spde_bem_step(m, state, dt, cfg),
        (SchemeKind::SfdeEm, ModelKind::Sfde(m)) => em_step_sfde(m, state, dt),
        (k, m) => Err(SimError::SchemeModelMismatch {
            scheme: k.name().into(),
            model: m.family().into(),
        }),
    }
}

/// Number of noise components one step of the scheme consumes.
fn noise_count(spec: &ModelSpec) -> usize {
    match &spec.kind {
        ModelKind::Sode(m) => m.noise_dim,
        ModelKind::Spde(m) => m.n_modes,
        ModelKind::Sfde(m) => m.noise_dim,
    }
}

/// One-step update of a bare state value from explicit increments,
/// dispatching on the scheme. Shared by the coupling and by the
/// strong-order machinery, which control the noise themselves.
pub fn advance_values(
    kind: SchemeKind,
    spec: &ModelSpec,
    value: &StateValue,
    tau: f64,
    dw: &[f64],
    cfg: &NewtonConfig,
) -> Result<StateValue, SimError> {
    match (kind, &spec.kind, value) {
        (SchemeKind::Bem, ModelKind::Sode(m), StateValue::Vector(x)) => {
            Ok(StateValue::Vector(bem_values(m, x, tau, dw, cfg)?))
        }
        (SchemeKind::Em, ModelKind::Sode(m), StateValue::Vector(x)) => {
            Ok(StateValue::Vector(em_sode_values(m, x, tau, dw)?))
        }
        (SchemeKind::SpdeExpEuler, ModelKind::Spde(m), StateValue::Vector(x)) => {
            Ok(StateValue::Vector(spde_expeuler_values(m, x, tau, dw)?))
        }
        (SchemeKind::SpdeBem, ModelKind::Spde(m), StateValue::Vector(x)) => {
            Ok(StateValue::Vector(spde_bem_values(m, x, tau, dw, cfg)?))
        }
        (SchemeKind::SfdeEm, ModelKind::Sfde(m), StateValue::Segment(seg)) => {
            Ok(StateValue::Segment(em_sfde_values(m, seg, tau, dw)?))
        }
        (k, m, _) => Err(SimError::SchemeModelMismatch {
            scheme: k.name().into(),
            model: m.family().into(),
        }),
    }
}

/// Advance two trajectories one step with identical noise increments
/// (synchronous coupling). Both must sit at the same step index.
pub fn coupled_step(
    kind: SchemeKind,
    spec: &ModelSpec,
    s1: &PathState,
    s2: &PathState,
    dt: &StepSize,
    cfg: &NewtonConfig,
) -> Result<(PathState, PathState), SimError> {
    if s1.step != s2.step {
        return Err(SimError::ClockMismatch {
            left: s1.step,
            right: s2.step,
        });
    }
    // Draw once from the first trajectory's stream, apply to both.
    let step_idx = s1.step;
    let count = noise_count(spec);
    let dw: Vec<f64> = match &spec.kind {
        ModelKind::Spde(m) => draw_mode_increments(m, &s1.rng, step_idx, dt.tau),
        _ => draw_increments(&s1.rng, step_idx, count, dt.tau),
    };
    let advance = |state: &PathState| -> Result<PathState, SimError> {
        let value = advance_values(kind, spec, &state.value, dt.tau, &dw, cfg)?;
        match &value {
            StateValue::Vector(v) => check_finite(step_idx + 1, v)?,
            StateValue::Segment(s) => check_finite(step_idx + 1, &s.values)?,
        }
        Ok(PathState {
            step: step_idx + 1,
            time: (step_idx + 1) as f64 * dt.tau,
            value,
            rng: state.rng,
        })
    };
    Ok((advance(s1)?, advance(s2)?))
}

/// Write a trajectory as CSV rows `k,t,value_0..value_{m-1}`.
pub fn dump_trajectory_csv<W: Write>(
    mut w: W,
    rows: impl Iterator<Item = (u64, f64, Vec<f64>)>,
) -> std::io::Result<()> {
    for (k, t, values) in rows {
        write!(w, "{k},{t}")?;
        for v in values {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
