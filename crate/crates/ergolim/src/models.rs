//! Model definitions for the three supported families:
//!
//! - `SodeModel` — finite-dimensional SDEs `dX = b(X)dt + σ(X)dW` with
//!   a dissipative, possibly superlinearly growing drift;
//! - `SpectralSpdeModel` — spectral truncations of semilinear parabolic
//!   equations `dX = (AX + F(X))dt + dW` with additive per-mode noise,
//!   N sine modes of the Dirichlet Laplacian on (0,1);
//! - `SfdeModel` — scalar/vector delay equations whose state is a
//!   linearly interpolated segment over `[-δ₀, 0]`.
//!
//! Each builtin carries `AssumptionMeta`: the moment/mixing/convergence
//! exponents used by the condition checker and the experiment
//! pipelines. Structural inequalities (one-sided Lipschitz bounds,
//! dissipativity, the delay hypotheses on the drift and diffusion
//! functionals) are checked on random samples at construction — they
//! are treated as claims to verify, not axioms.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::numutil::norm2;
use crate::rng::{NoiseStream, PURPOSE_VALIDATION};

/// Writer-style vector field: reads the state, writes the output slice.
pub type VecField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Pointwise real function (used for Nemytskii nonlinearities).
pub type Pointwise = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Hard cap on any state entry; beyond it a scheme reports overflow
/// instead of propagating infinities.
pub const OVERFLOW_LIMIT: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    UnknownModel(String),
    MissingParam { model: String, key: String },
    InvalidParam { key: String, msg: String },
    InvariantViolated(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::UnknownModel(n) => write!(f, "unknown model `{n}`"),
            ModelError::MissingParam { model, key } => {
                write!(f, "model `{model}` requires parameter `{key}`")
            }
            ModelError::InvalidParam { key, msg } => write!(f, "parameter `{key}`: {msg}"),
            ModelError::InvariantViolated(msg) => write!(f, "model invariant violated: {msg}"),
        }
    }
}

impl std::error::Error for ModelError {}

/// Scalar-or-string parameter value for the model registry.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

/// Flat parameter map consumed by [`builtin_model`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    pub fn new() -> Self {
        Params(BTreeMap::new())
    }

    pub fn set_num(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), ParamValue::Num(value));
        self
    }

    pub fn set_text(mut self, key: &str, value: &str) -> Self {
        self.0
            .insert(key.to_string(), ParamValue::Text(value.to_string()));
        self
    }

    fn num(&self, model: &str, key: &str) -> Result<f64, ModelError> {
        match self.0.get(key) {
            Some(ParamValue::Num(v)) => Ok(*v),
            Some(ParamValue::Text(_)) => Err(ModelError::InvalidParam {
                key: key.into(),
                msg: "expected a number".into(),
            }),
            None => Err(ModelError::MissingParam {
                model: model.into(),
                key: key.into(),
            }),
        }
    }

    fn num_or(&self, model: &str, key: &str, default: f64) -> Result<f64, ModelError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(_) => self.num(model, key),
        }
    }

    fn usize_of(&self, model: &str, key: &str) -> Result<usize, ModelError> {
        let v = self.num(model, key)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(ModelError::InvalidParam {
                key: key.into(),
                msg: format!("expected a positive integer, got {v}"),
            });
        }
        Ok(v as usize)
    }

    fn text_or(&self, key: &str, default: &str) -> String {
        match self.0.get(key) {
            Some(ParamValue::Text(s)) => s.clone(),
            Some(ParamValue::Num(v)) => v.to_string(),
            None => default.to_string(),
        }
    }
}

/// Radial dissipativity claim `⟨x, b(x)⟩ ≤ −rate·|x|² + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipativity {
    pub rate: f64,
    pub offset: f64,
}

/// Finite-dimensional SDE model.
pub struct SodeModel {
    pub dim: usize,
    pub noise_dim: usize,
    drift: VecField,
    drift_jacobian: Option<VecField>,
    diffusion: VecField,
    /// Two-point bound `⟨x−y, b(x)−b(y)⟩ ≤ L·|x−y|²` (may be negative).
    pub one_sided_lipschitz: f64,
    /// Radial bound with positive rate; witnesses ergodicity.
    pub dissipativity: Dissipativity,
    /// Polynomial growth degree of the drift.
    pub drift_degree: u32,
}

impl SodeModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        noise_dim: usize,
        drift: VecField,
        drift_jacobian: Option<VecField>,
        diffusion: VecField,
        one_sided_lipschitz: f64,
        dissipativity: Dissipativity,
        drift_degree: u32,
    ) -> Result<Self, ModelError> {
        if dim == 0 || noise_dim == 0 {
            return Err(ModelError::InvalidParam {
                key: "dim".into(),
                msg: "dimensions must be positive".into(),
            });
        }
        if dissipativity.rate <= 0.0 {
            return Err(ModelError::InvalidParam {
                key: "dissipativity".into(),
                msg: "rate must be positive".into(),
            });
        }
        let model = SodeModel {
            dim,
            noise_dim,
            drift,
            drift_jacobian,
            diffusion,
            one_sided_lipschitz,
            dissipativity,
            drift_degree,
        };
        let zero = vec![0.0; dim];
        let mut out = vec![0.0; dim];
        model.drift(&zero, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvariantViolated(
                "drift not finite at the origin".into(),
            ));
        }
        let mut sig = vec![0.0; dim * noise_dim];
        model.diffusion(&zero, &mut sig);
        if sig.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvariantViolated(
                "diffusion not finite at the origin".into(),
            ));
        }
        model.check_drift_inequalities(128, 3.0, 0x5EED)?;
        Ok(model)
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out);
    }

    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out);
    }

    /// Drift Jacobian, row-major d×d: closed form when provided, else
    /// central differences with step `1e-6·(1 + |x|)`.
    pub fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        if let Some(jac) = &self.drift_jacobian {
            jac(x, out);
            return;
        }
        let d = self.dim;
        let step = 1e-6 * (1.0 + norm2(x));
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        for j in 0..d {
            xp[j] = x[j] + step;
            (self.drift)(&xp, &mut fp);
            xp[j] = x[j] - step;
            (self.drift)(&xp, &mut fm);
            xp[j] = x[j];
            for i in 0..d {
                out[i * d + j] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
    }

    /// Sampled verification of the stored one-sided Lipschitz and
    /// radial dissipativity claims inside `[-radius, radius]^d`.
    pub fn check_drift_inequalities(
        &self,
        samples: usize,
        radius: f64,
        seed: u64,
    ) -> Result<(), ModelError> {
        let stream = NoiseStream::new(seed, 0, PURPOSE_VALIDATION);
        let d = self.dim;
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut bx = vec![0.0; d];
        let mut by = vec![0.0; d];
        let tol = 1e-9;
        for s in 0..samples as u64 {
            for j in 0..d {
                x[j] = radius * (2.0 * stream.uniform(s, 2 * j as u64) - 1.0);
                y[j] = radius * (2.0 * stream.uniform(s, 2 * j as u64 + 1) - 1.0);
            }
            self.drift(&x, &mut bx);
            self.drift(&y, &mut by);
            let mut inner = 0.0;
            let mut dist_sq = 0.0;
            let mut radial = 0.0;
            let mut x_sq = 0.0;
            for j in 0..d {
                inner += (x[j] - y[j]) * (bx[j] - by[j]);
                dist_sq += (x[j] - y[j]) * (x[j] - y[j]);
                radial += x[j] * bx[j];
                x_sq += x[j] * x[j];
            }
            if inner > self.one_sided_lipschitz * dist_sq + tol * (1.0 + dist_sq) {
                return Err(ModelError::InvariantViolated(format!(
                    "one-sided Lipschitz bound {} violated: ⟨x−y,b(x)−b(y)⟩ = {inner:.6} at |x−y|² = {dist_sq:.6}",
                    self.one_sided_lipschitz
                )));
            }
            let bound = -self.dissipativity.rate * x_sq + self.dissipativity.offset;
            if radial > bound + tol * (1.0 + x_sq) {
                return Err(ModelError::InvariantViolated(format!(
                    "dissipativity (rate {}, offset {}) violated: ⟨x,b(x)⟩ = {radial:.6} at |x|² = {x_sq:.6}",
                    self.dissipativity.rate, self.dissipativity.offset
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SodeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SodeModel")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("one_sided_lipschitz", &self.one_sided_lipschitz)
            .field("drift_degree", &self.drift_degree)
            .finish()
    }
}

/// Spectral truncation of a semilinear parabolic equation with
/// additive noise. Modes are coefficients against the orthonormal sine
/// basis e_j(ξ) = √2 sin(jπξ); the spatial parameter is h = 1/N.
pub struct SpectralSpdeModel {
    pub n_modes: usize,
    /// Eigenvalues λ_j of −A, strictly increasing.
    pub eigenvalues: Vec<f64>,
    /// Per-mode noise variances q_j of the driving Wiener process.
    pub noise_weights: Vec<f64>,
    /// One-sided Lipschitz constant of the nonlinearity; must satisfy
    /// λ_F < λ₁.
    pub lambda_f: f64,
    /// Noise spatial-regularity exponent in (0, 1].
    pub beta1: f64,
    nonlinearity: Option<Pointwise>,
    nonlinearity_deriv: Option<Pointwise>,
    /// Synthesis table: synth[m·N + j] = e_{j+1}(ξ_{m+1}) on the
    /// collocation grid ξ_m = m/(2N+2), m = 1..2N+1.
    synth: Vec<f64>,
}

impl SpectralSpdeModel {
    pub fn new(
        eigenvalues: Vec<f64>,
        noise_weights: Vec<f64>,
        lambda_f: f64,
        beta1: f64,
        nonlinearity: Option<Pointwise>,
        nonlinearity_deriv: Option<Pointwise>,
        regularity_bound: f64,
    ) -> Result<Self, ModelError> {
        let n = eigenvalues.len();
        if n == 0 || noise_weights.len() != n {
            return Err(ModelError::InvalidParam {
                key: "eigenvalues".into(),
                msg: "need one eigenvalue and one noise weight per mode".into(),
            });
        }
        if !(beta1 > 0.0 && beta1 <= 1.0) {
            return Err(ModelError::InvalidParam {
                key: "beta1".into(),
                msg: format!("must lie in (0,1], got {beta1}"),
            });
        }
        for w in eigenvalues.windows(2) {
            if w[1] <= w[0] {
                return Err(ModelError::InvariantViolated(
                    "eigenvalues must be strictly increasing".into(),
                ));
            }
        }
        if eigenvalues[0] <= lambda_f {
            return Err(ModelError::InvariantViolated(format!(
                "spectral gap requires λ₁ = {} > λ_F = {lambda_f}",
                eigenvalues[0]
            )));
        }
        let reg_sum: f64 = eigenvalues
            .iter()
            .zip(&noise_weights)
            .map(|(&l, &q)| l.powf(beta1 - 1.0) * q)
            .sum();
        if !(reg_sum <= regularity_bound) {
            return Err(ModelError::InvariantViolated(format!(
                "noise regularity sum Σ λ_j^(β₁−1) q_j = {reg_sum:.4} exceeds bound {regularity_bound}"
            )));
        }
        let grid = 2 * n + 1;
        let mut synth = vec![0.0; grid * n];
        for m in 0..grid {
            let xi = (m as f64 + 1.0) / (grid as f64 + 1.0);
            for j in 0..n {
                synth[m * n + j] =
                    std::f64::consts::SQRT_2 * ((j as f64 + 1.0) * std::f64::consts::PI * xi).sin();
            }
        }
        Ok(SpectralSpdeModel {
            n_modes: n,
            eigenvalues,
            noise_weights,
            lambda_f,
            beta1,
            nonlinearity,
            nonlinearity_deriv,
            synth,
        })
    }

    pub fn spatial_h(&self) -> f64 {
        1.0 / self.n_modes as f64
    }

    pub fn has_nonlinearity(&self) -> bool {
        self.nonlinearity.is_some()
    }

    /// Physical values on the collocation grid (2N+1 interior points).
    pub fn grid_values(&self, modes: &[f64], out: &mut [f64]) {
        let n = self.n_modes;
        let grid = 2 * n + 1;
        debug_assert_eq!(modes.len(), n);
        debug_assert_eq!(out.len(), grid);
        for m in 0..grid {
            let row = &self.synth[m * n..(m + 1) * n];
            out[m] = row.iter().zip(modes).map(|(s, y)| s * y).sum();
        }
    }

    /// Mode coefficients of the Nemytskii nonlinearity by collocation:
    /// synthesize on the 2N+1-point grid, apply f pointwise, project
    /// back onto the leading N modes (exact up to aliasing of modes
    /// above 2N+1).
    pub fn nonlinearity_modes(&self, modes: &[f64], out: &mut [f64]) {
        let n = self.n_modes;
        let grid = 2 * n + 1;
        let Some(f) = &self.nonlinearity else {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        };
        let mut phys = vec![0.0; grid];
        self.grid_values(modes, &mut phys);
        for v in phys.iter_mut() {
            *v = f(*v);
        }
        let scale = 1.0 / (grid as f64 + 1.0);
        for j in 0..n {
            let mut acc = 0.0;
            for m in 0..grid {
                acc += phys[m] * self.synth[m * n + j];
            }
            out[j] = acc * scale;
        }
    }

    /// Jacobian of [`Self::nonlinearity_modes`], row-major N×N:
    /// (1/(2N+2)) Σ_m e_i(ξ_m) f'(u(ξ_m)) e_j(ξ_m).
    pub fn nonlinearity_jacobian(&self, modes: &[f64], out: &mut [f64]) {
        let n = self.n_modes;
        let grid = 2 * n + 1;
        debug_assert_eq!(out.len(), n * n);
        let Some(fp) = &self.nonlinearity_deriv else {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        };
        let mut phys = vec![0.0; grid];
        self.grid_values(modes, &mut phys);
        for v in phys.iter_mut() {
            *v = fp(*v);
        }
        let scale = 1.0 / (grid as f64 + 1.0);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for m in 0..grid {
                    acc += self.synth[m * n + i] * phys[m] * self.synth[m * n + j];
                }
                out[i * n + j] = acc * scale;
            }
        }
    }
}

impl fmt::Debug for SpectralSpdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSpdeModel")
            .field("n_modes", &self.n_modes)
            .field("lambda_f", &self.lambda_f)
            .field("beta1", &self.beta1)
            .finish()
    }
}

/// Constants of the structural hypotheses on a delay model: diffusion
/// Lipschitz/bound constants (l1, l2), drift dissipativity constants
/// (l3, l4) with the gap l3 > l1 + l4, drift Lipschitz constant l5,
/// and the Hölder data (l6, exponent ≥ 1/2) of the initial segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisConstants {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l6: f64,
    pub holder_exponent: f64,
}

/// Writer-style functional of a segment (reads the nodes, writes d or
/// d×D outputs).
pub type SegmentField = Arc<dyn Fn(&SegmentNodes<'_>, &mut [f64]) + Send + Sync>;

/// Drift functional of a delay model.
#[derive(Clone)]
pub enum SfdeDrift {
    /// −a·φ(0) + b·φ(−δ₀), componentwise.
    Linear { a: f64, b: f64 },
    /// Arbitrary functional of the node values (oldest node first).
    Custom(SegmentField),
}

/// Diffusion functional of a delay model (d×D, row-major).
#[derive(Clone)]
pub enum SfdeDiffusion {
    Constant(f64),
    Custom(SegmentField),
}

/// Borrowed view of a segment's grid nodes: node `i` holds the value at
/// θ = −δ₀ + i·τ, so node 0 is the oldest and node `n_seg` is φ(0).
pub struct SegmentNodes<'a> {
    pub dim: usize,
    pub n_seg: usize,
    pub delay: f64,
    pub values: &'a [f64],
}

impl SegmentNodes<'_> {
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn head(&self) -> &[f64] {
        self.node(self.n_seg)
    }

    pub fn oldest(&self) -> &[f64] {
        self.node(0)
    }

    /// Mean-square weighted by node weights: Σ_i w_i |φ(θ_i)|².
    pub fn weighted_norm_sq(&self, weights: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            acc += w * self.node(i).iter().map(|v| v * v).sum::<f64>();
        }
        acc
    }
}

/// Delay model: segment state over `[-δ₀, 0]` on a uniform grid of
/// `n_seg` cells, drift/diffusion functionals of the segment, and the
/// discrete measures ν₁, ν₂ entering the structural hypotheses.
pub struct SfdeModel {
    pub dim: usize,
    pub noise_dim: usize,
    pub delay: f64,
    pub n_seg: usize,
    pub drift: SfdeDrift,
    pub diffusion: SfdeDiffusion,
    /// Node weights of ν₁ (diffusion hypothesis), length n_seg + 1.
    pub nu1: Vec<f64>,
    /// Node weights of ν₂ (drift hypothesis), length n_seg + 1.
    pub nu2: Vec<f64>,
    pub constants: HypothesisConstants,
    /// Initial segment, node-major (length (n_seg+1)·dim).
    pub initial_segment: Vec<f64>,
}

impl SfdeModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        noise_dim: usize,
        delay: f64,
        n_seg: usize,
        drift: SfdeDrift,
        diffusion: SfdeDiffusion,
        nu1: Vec<f64>,
        nu2: Vec<f64>,
        constants: HypothesisConstants,
        initial_segment: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if dim == 0 || n_seg == 0 || !(delay > 0.0) {
            return Err(ModelError::InvalidParam {
                key: "delay".into(),
                msg: "need dim ≥ 1, n_seg ≥ 1, delay > 0".into(),
            });
        }
        let nodes = n_seg + 1;
        if nu1.len() != nodes || nu2.len() != nodes {
            return Err(ModelError::InvalidParam {
                key: "nu".into(),
                msg: format!("measure weights must have {nodes} entries"),
            });
        }
        for (name, nu) in [("nu1", &nu1), ("nu2", &nu2)] {
            if nu.iter().any(|&w| w < 0.0) {
                return Err(ModelError::InvariantViolated(format!(
                    "{name} weights must be nonnegative"
                )));
            }
            let total: f64 = nu.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(ModelError::InvariantViolated(format!(
                    "{name} weights must sum to 1, got {total}"
                )));
            }
        }
        let c = &constants;
        if [c.l1, c.l2, c.l3, c.l4, c.l5, c.l6]
            .iter()
            .any(|&v| !(v > 0.0))
        {
            return Err(ModelError::InvalidParam {
                key: "constants".into(),
                msg: "hypothesis constants must be positive".into(),
            });
        }
        if c.l3 <= c.l1 + c.l4 {
            return Err(ModelError::InvariantViolated(format!(
                "dissipativity gap requires l3 > l1 + l4, got {} ≤ {} + {}",
                c.l3, c.l1, c.l4
            )));
        }
        if c.holder_exponent < 0.5 {
            return Err(ModelError::InvalidParam {
                key: "holder_exponent".into(),
                msg: format!("must be ≥ 1/2, got {}", c.holder_exponent),
            });
        }
        if initial_segment.len() != nodes * dim {
            return Err(ModelError::InvalidParam {
                key: "initial_segment".into(),
                msg: format!(
                    "expected {} values, got {}",
                    nodes * dim,
                    initial_segment.len()
                ),
            });
        }
        let model = SfdeModel {
            dim,
            noise_dim,
            delay,
            n_seg,
            drift,
            diffusion,
            nu1,
            nu2,
            constants,
            initial_segment,
        };
        model.check_initial_holder()?;
        Ok(model)
    }

    /// Grid step τ = δ₀ / n_seg, derived from the stored rational pair.
    pub fn segment_tau(&self) -> f64 {
        self.delay / self.n_seg as f64
    }

    /// The same model on a refined (or coarsened) segment grid. The
    /// initial segment is resampled by linear interpolation; measure
    /// weights transfer only when supported on the window endpoints,
    /// since interior masses have no canonical image on a new grid.
    pub fn with_resolution(&self, n_seg: usize) -> Result<SfdeModel, ModelError> {
        if n_seg == 0 {
            return Err(ModelError::InvalidParam {
                key: "n_seg".into(),
                msg: "must be positive".into(),
            });
        }
        let old_nodes = self.n_seg + 1;
        let remap = |nu: &[f64], name: &str| -> Result<Vec<f64>, ModelError> {
            for (i, &w) in nu.iter().enumerate() {
                if w != 0.0 && i != 0 && i != old_nodes - 1 {
                    return Err(ModelError::InvalidParam {
                        key: name.into(),
                        msg: "resolution change requires endpoint-supported measures".into(),
                    });
                }
            }
            let mut out = vec![0.0; n_seg + 1];
            out[0] = nu[0];
            out[n_seg] = nu[old_nodes - 1];
            Ok(out)
        };
        let nu1 = remap(&self.nu1, "nu1")?;
        let nu2 = remap(&self.nu2, "nu2")?;
        let mut initial = Vec::with_capacity((n_seg + 1) * self.dim);
        for i in 0..=n_seg {
            // Position on the old grid in cell units.
            let pos = i as f64 * self.n_seg as f64 / n_seg as f64;
            let cell = (pos.floor() as usize).min(self.n_seg - 1);
            let frac = pos - cell as f64;
            for c in 0..self.dim {
                let a = self.initial_segment[cell * self.dim + c];
                let b = self.initial_segment[(cell + 1) * self.dim + c];
                initial.push((1.0 - frac) * a + frac * b);
            }
        }
        SfdeModel::new(
            self.dim,
            self.noise_dim,
            self.delay,
            n_seg,
            self.drift.clone(),
            self.diffusion.clone(),
            nu1,
            nu2,
            self.constants,
            initial,
        )
    }

    pub fn drift_eval(&self, seg: &SegmentNodes<'_>, out: &mut [f64]) {
        match &self.drift {
            SfdeDrift::Linear { a, b } => {
                let head = seg.head();
                let oldest = seg.oldest();
                for i in 0..self.dim {
                    out[i] = -a * head[i] + b * oldest[i];
                }
            }
            SfdeDrift::Custom(f) => f(seg, out),
        }
    }

    pub fn diffusion_eval(&self, seg: &SegmentNodes<'_>, out: &mut [f64]) {
        match &self.diffusion {
            SfdeDiffusion::Constant(c) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                // c · I on the leading square block.
                for i in 0..self.dim.min(self.noise_dim) {
                    out[i * self.noise_dim + i] = *c;
                }
            }
            SfdeDiffusion::Custom(f) => f(seg, out),
        }
    }

    /// Pairwise Hölder check of the initial segment against the
    /// declared (l6, exponent) data.
    fn check_initial_holder(&self) -> Result<(), ModelError> {
        let tau = self.segment_tau();
        let nodes = self.n_seg + 1;
        for i in 0..nodes {
            for j in (i + 1)..nodes {
                let dt = (j - i) as f64 * tau;
                let mut diff = 0.0;
                for c in 0..self.dim {
                    let d = self.initial_segment[j * self.dim + c]
                        - self.initial_segment[i * self.dim + c];
                    diff += d * d;
                }
                let bound = self.constants.l6 * dt.powf(self.constants.holder_exponent);
                if diff.sqrt() > bound + 1e-12 {
                    return Err(ModelError::InvariantViolated(format!(
                        "initial segment violates the Hölder bound at nodes {i},{j}: |Δx| = {:.4} > {bound:.4}",
                        diff.sqrt()
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SfdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SfdeModel")
            .field("dim", &self.dim)
            .field("delay", &self.delay)
            .field("n_seg", &self.n_seg)
            .finish()
    }
}

/// Claimed mixing-rate form of a discretization.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingForm {
    /// ρ(t) = e^{−c t}; the rate is a reference value when known.
    Exponential { rate: Option<f64> },
    /// Rate tabulated as (t, ρ(t)) pairs.
    Tabulated(Vec<(f64, f64)>),
}

/// Moment, mixing, and strong-convergence exponents of a model /
/// scheme pairing, used by the condition checker and the couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionMeta {
    /// Initial-datum growth exponents of the moment bounds (≥ 1).
    pub r_tilde: f64,
    pub q_tilde: f64,
    /// Mixing Hölder exponents in (0, 1].
    pub gamma1: f64,
    pub gamma2: f64,
    /// State-growth exponents of the contraction bounds (≥ 0).
    pub beta: f64,
    pub kappa: f64,
    /// Strong-convergence exponents: |Δ^α| = h^{α₁} + τ^{α₂}.
    pub alpha: (f64, f64),
    pub mixing: MixingForm,
    /// Largest moment order with a uniform bound (None = every order).
    pub moment_bound_q: Option<f64>,
    pub moment_bound_r: Option<f64>,
}

impl AssumptionMeta {
    pub fn validate(&self, has_spatial: bool) -> Result<(), ModelError> {
        let ok_range = |v: f64, lo: f64| v >= lo && v.is_finite();
        if !ok_range(self.r_tilde, 1.0) || !ok_range(self.q_tilde, 1.0) {
            return Err(ModelError::InvariantViolated("r̃, q̃ must be ≥ 1".into()));
        }
        for g in [self.gamma1, self.gamma2] {
            if !(g > 0.0 && g <= 1.0) {
                return Err(ModelError::InvariantViolated(
                    "mixing exponents must lie in (0,1]".into(),
                ));
            }
        }
        if self.beta < 0.0 || self.kappa < 0.0 {
            return Err(ModelError::InvariantViolated("β, κ must be ≥ 0".into()));
        }
        if !(self.alpha.1 > 0.0) {
            return Err(ModelError::InvariantViolated("α₂ must be positive".into()));
        }
        if has_spatial && !(self.alpha.0 > 0.0) {
            return Err(ModelError::InvariantViolated(
                "α₁ must be positive for spatially discretized models".into(),
            ));
        }
        Ok(())
    }
}

/// A model family instance.
#[derive(Debug)]
pub enum ModelKind {
    Sode(SodeModel),
    Spde(SpectralSpdeModel),
    Sfde(SfdeModel),
}

impl ModelKind {
    pub fn family(&self) -> &'static str {
        match self {
            ModelKind::Sode(_) => "sode",
            ModelKind::Spde(_) => "spde",
            ModelKind::Sfde(_) => "sfde",
        }
    }
}

/// A fully specified model: family instance plus assumption metadata.
#[derive(Debug)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    pub meta: AssumptionMeta,
}

fn exponential_meta(alpha: (f64, f64), rate: Option<f64>) -> AssumptionMeta {
    AssumptionMeta {
        r_tilde: 1.0,
        q_tilde: 1.0,
        gamma1: 1.0,
        gamma2: 1.0,
        beta: 0.0,
        kappa: 0.0,
        alpha,
        mixing: MixingForm::Exponential { rate },
        moment_bound_q: None,
        moment_bound_r: None,
    }
}

/// Construct a builtin model by name.
///
/// Known names: `ou`, `double_well`, `allen_cahn`, `stochastic_heat`,
/// `linear_delay`. Each returns a populated [`ModelSpec`] whose
/// metadata records the exponents under which the moment, mixing, and
/// strong-convergence bounds are expected to hold for the scheme the
/// model is normally paired with.
pub fn builtin_model(name: &str, params: &Params) -> Result<ModelSpec, ModelError> {
    match name {
        "ou" => {
            let theta = params.num("ou", "theta")?;
            let sigma = params.num("ou", "sigma")?;
            let d = params.usize_of("ou", "d").unwrap_or(1);
            if theta <= 0.0 {
                return Err(ModelError::InvalidParam {
                    key: "theta".into(),
                    msg: "mean-reversion rate must be positive".into(),
                });
            }
            let drift: VecField = Arc::new(move |x: &[f64], out: &mut [f64]| {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = -theta * v;
                }
            });
            let jac: VecField = Arc::new(move |x: &[f64], out: &mut [f64]| {
                let d = x.len();
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    out[i * d + i] = -theta;
                }
            });
            let diffusion: VecField = Arc::new(move |x: &[f64], out: &mut [f64]| {
                let d = x.len();
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    out[i * d + i] = sigma;
                }
            });
            let kind = SodeModel::new(
                d,
                d,
                drift,
                Some(jac),
                diffusion,
                -theta,
                Dissipativity {
                    rate: theta,
                    offset: 0.0,
                },
                1,
            )?;
            Ok(ModelSpec {
                name: "ou".into(),
                kind: ModelKind::Sode(kind),
                meta: exponential_meta((1.0, 0.5), Some(theta)),
            })
        }
        "double_well" => {
            let sigma = params.num_or("double_well", "sigma", 1.0)?;
            let noise = params.text_or("noise", "constant");
            let drift: VecField = Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = x[0] - x[0] * x[0] * x[0];
            });
            let jac: VecField = Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = 1.0 - 3.0 * x[0] * x[0];
            });
            let diffusion: VecField = match noise.as_str() {
                "constant" => Arc::new(move |_x: &[f64], out: &mut [f64]| {
                    out[0] = sigma;
                }),
                "sin" => Arc::new(move |x: &[f64], out: &mut [f64]| {
                    out[0] = sigma * (1.0 + x[0].sin());
                }),
                other => {
                    return Err(ModelError::InvalidParam {
                        key: "noise".into(),
                        msg: format!("unknown noise form `{other}` (constant | sin)"),
                    })
                }
            };
            // ⟨x−y, b(x)−b(y)⟩ = |x−y|²(1 − (x²+xy+y²)) ≤ |x−y|²;
            // ⟨x, b(x)⟩ = x² − x⁴ ≤ −x² + 1.
            let kind = SodeModel::new(
                1,
                1,
                drift,
                Some(jac),
                diffusion,
                1.0,
                Dissipativity {
                    rate: 1.0,
                    offset: 1.0,
                },
                3,
            )?;
            Ok(ModelSpec {
                name: "double_well".into(),
                kind: ModelKind::Sode(kind),
                meta: exponential_meta((1.0, 0.5), None),
            })
        }
        "allen_cahn" | "stochastic_heat" => {
            let n = params.usize_of(name, "N")?;
            let beta1 = params.num_or(name, "beta1", 1.0)?;
            let sigma = params.num_or(name, "sigma", 1.0)?;
            let reg_bound = params.num_or(name, "regularity_bound", 10.0)?;
            let eigenvalues: Vec<f64> = (1..=n)
                .map(|j| (j as f64 * std::f64::consts::PI).powi(2))
                .collect();
            let noise_weights: Vec<f64> = eigenvalues
                .iter()
                .map(|&l| sigma * sigma * l.powf(-beta1))
                .collect();
            let (nonlin, nonlin_deriv, lambda_f): (Option<Pointwise>, Option<Pointwise>, f64) =
                if name == "allen_cahn" {
                    (
                        Some(Arc::new(|u: f64| u - u * u * u)),
                        Some(Arc::new(|u: f64| 1.0 - 3.0 * u * u)),
                        1.0,
                    )
                } else {
                    (None, None, 0.0)
                };
            let kind = SpectralSpdeModel::new(
                eigenvalues,
                noise_weights,
                lambda_f,
                beta1,
                nonlin,
                nonlin_deriv,
                reg_bound,
            )?;
            let rate = kind.eigenvalues[0] - lambda_f;
            Ok(ModelSpec {
                name: name.into(),
                kind: ModelKind::Spde(kind),
                meta: exponential_meta((beta1, beta1 / 2.0), Some(rate)),
            })
        }
        "linear_delay" => {
            let a = params.num("linear_delay", "a")?;
            let b = params.num("linear_delay", "b")?;
            let delta0 = params.num("linear_delay", "delta0")?;
            let n_seg = params.usize_of("linear_delay", "Nseg")?;
            let sigma = params.num("linear_delay", "sigma")?;
            let x0 = params.num_or("linear_delay", "x0", 1.0)?;
            if !(a > 0.0 && b >= 0.0) {
                return Err(ModelError::InvalidParam {
                    key: "a".into(),
                    msg: "need a > 0 and b ≥ 0".into(),
                });
            }
            let nodes = n_seg + 1;
            // ν₁: point mass at θ = 0. ν₂: half mass at each endpoint,
            // which makes the drift dissipativity inequality hold with
            // l3 = a and l4 = b exactly (Young's inequality
            // b·Δ₀·Δ_{−δ} ≤ (b/2)(Δ₀² + Δ_{−δ}²) = b·∫Δ² dν₂).
            let mut nu1 = vec![0.0; nodes];
            nu1[n_seg] = 1.0;
            let mut nu2 = vec![0.0; nodes];
            nu2[0] = 0.5;
            nu2[n_seg] = 0.5;
            let constants = HypothesisConstants {
                l1: 1e-6, // constant diffusion: any positive Lipschitz constant works
                l2: sigma.abs(),
                l3: a,
                l4: if b > 0.0 { b } else { 1e-6 },
                l5: 2.0 * (a * a + b * b),
                l6: 1.0,
                holder_exponent: 1.0,
            };
            let kind = SfdeModel::new(
                1,
                1,
                delta0,
                n_seg,
                SfdeDrift::Linear { a, b },
                SfdeDiffusion::Constant(sigma),
                nu1,
                nu2,
                constants,
                vec![x0; nodes],
            )?;
            Ok(ModelSpec {
                name: "linear_delay".into(),
                kind: ModelKind::Sfde(kind),
                meta: exponential_meta((1.0, 0.5), None),
            })
        }
        other => Err(ModelError::UnknownModel(other.into())),
    }
}

/// Outcome of the Monte-Carlo hypothesis validation of a delay model.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Worst ratio of the diffusion hypotheses (Lipschitz and bound).
    pub h1_worst: f64,
    /// Worst ratio of the drift hypotheses (dissipativity and
    /// Lipschitz).
    pub h2_worst: f64,
    /// Worst Hölder ratio of the initial segment.
    pub h3_worst: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub box_radius: f64,
    pub samples: usize,
}

/// Monte-Carlo validation of the three structural hypotheses of a
/// delay model against its declared constants.
///
/// Random segment pairs are drawn with node values uniform in
/// `[-box_radius, box_radius]`; each hypothesis is expressed as a ratio
/// that must not exceed 1, and the worst ratio over all sampled pairs
/// is reported. `pass` requires every worst ratio ≤ 1 + tolerance.
pub fn validate_hypotheses(
    model: &SfdeModel,
    samples: usize,
    box_radius: f64,
    seed: u64,
) -> ValidationReport {
    let tol = 1e-9;
    let stream = NoiseStream::new(seed, 1, PURPOSE_VALIDATION);
    let nodes = model.n_seg + 1;
    let d = model.dim;
    let mut h1_worst: f64 = 0.0;
    let mut h2_worst: f64 = 0.0;

    let mut seg1 = vec![0.0; nodes * d];
    let mut seg2 = vec![0.0; nodes * d];
    let mut b1 = vec![0.0; d];
    let mut b2 = vec![0.0; d];
    let mut s1 = vec![0.0; d * model.noise_dim];
    let mut s2 = vec![0.0; d * model.noise_dim];

    for s in 0..samples as u64 {
        for (j, v) in seg1.iter_mut().enumerate() {
            *v = box_radius * (2.0 * stream.uniform(s, 2 * j as u64) - 1.0);
        }
        for (j, v) in seg2.iter_mut().enumerate() {
            *v = box_radius * (2.0 * stream.uniform(s, 2 * j as u64 + 1) - 1.0);
        }
        let view1 = SegmentNodes {
            dim: d,
            n_seg: model.n_seg,
            delay: model.delay,
            values: &seg1,
        };
        let view2 = SegmentNodes {
            dim: d,
            n_seg: model.n_seg,
            delay: model.delay,
            values: &seg2,
        };

        // Head difference and measure-weighted differences.
        let head_diff_sq: f64 = view1
            .head()
            .iter()
            .zip(view2.head())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let mut nu1_diff_sq = 0.0;
        let mut nu2_diff_sq = 0.0;
        for i in 0..nodes {
            let mut node_sq = 0.0;
            for c in 0..d {
                let dv = seg1[i * d + c] - seg2[i * d + c];
                node_sq += dv * dv;
            }
            nu1_diff_sq += model.nu1[i] * node_sq;
            nu2_diff_sq += model.nu2[i] * node_sq;
        }

        // Diffusion: Lipschitz and uniform bound.
        model.diffusion_eval(&view1, &mut s1);
        model.diffusion_eval(&view2, &mut s2);
        let sig_diff_sq: f64 = s1.iter().zip(&s2).map(|(a, b)| (a - b) * (a - b)).sum();
        let lip_denom = model.constants.l1 * (head_diff_sq + nu1_diff_sq);
        if lip_denom > 1e-14 {
            h1_worst = h1_worst.max(sig_diff_sq / lip_denom);
        } else if sig_diff_sq > 1e-14 {
            h1_worst = f64::INFINITY;
        }
        let bound_ratio = norm2(&s1) / model.constants.l2;
        h1_worst = h1_worst.max(bound_ratio);

        // Drift: dissipativity with gap, then Lipschitz.
        model.drift_eval(&view1, &mut b1);
        model.drift_eval(&view2, &mut b2);
        let mut inner = 0.0;
        for c in 0..d {
            inner += (view1.head()[c] - view2.head()[c]) * (b1[c] - b2[c]);
        }
        let numer = inner + model.constants.l3 * head_diff_sq;
        let denom = model.constants.l4 * nu2_diff_sq;
        if denom > 1e-14 {
            h2_worst = h2_worst.max(numer / denom);
        } else if numer > tol {
            h2_worst = f64::INFINITY;
        }
        let drift_diff_sq: f64 = b1.iter().zip(&b2).map(|(a, b)| (a - b) * (a - b)).sum();
        let lip5 = model.constants.l5 * (head_diff_sq + nu2_diff_sq);
        if lip5 > 1e-14 {
            h2_worst = h2_worst.max(drift_diff_sq / lip5);
        } else if drift_diff_sq > 1e-14 {
            h2_worst = f64::INFINITY;
        }
    }

    // Initial-segment Hölder ratio on the grid.
    let tau = model.segment_tau();
    let mut h3_worst: f64 = 0.0;
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            let dt = (j - i) as f64 * tau;
            let mut diff = 0.0;
            for c in 0..d {
                let dv = model.initial_segment[j * d + c] - model.initial_segment[i * d + c];
                diff += dv * dv;
            }
            h3_worst = h3_worst
                .max(diff.sqrt() / (model.constants.l6 * dt.powf(model.constants.holder_exponent)));
        }
    }

    let pass = [h1_worst, h2_worst, h3_worst]
        .iter()
        .all(|&r| r <= 1.0 + tol);
    ValidationReport {
        h1_worst,
        h2_worst,
        h3_worst,
        pass,
        tolerance: tol,
        box_radius,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_params() -> Params {
        Params::new()
            .set_num("theta", 1.0)
            .set_num("sigma", 1.0)
            .set_num("d", 1.0)
    }

    #[test]
    fn ou_builtin_matches_linear_drift() {
        let spec = builtin_model("ou", &ou_params()).unwrap();
        let ModelKind::Sode(m) = &spec.kind else {
            panic!("expected sode")
        };
        let mut out = [0.0];
        m.drift(&[2.0], &mut out);
        assert_eq!(out[0], -2.0);
        let mut sig = [0.0];
        m.diffusion(&[2.0], &mut sig);
        assert_eq!(sig[0], 1.0);
        assert_eq!(m.dissipativity.rate, 1.0);
    }

    #[test]
    fn unknown_model_is_rejected() {
        assert!(matches!(
            builtin_model("nope", &Params::new()),
            Err(ModelError::UnknownModel(_))
        ));
    }

    #[test]
    fn missing_parameter_names_the_field() {
        let err = builtin_model("ou", &Params::new().set_num("theta", 1.0)).unwrap_err();
        match err {
            ModelError::MissingParam { key, .. } => assert_eq!(key, "sigma"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn allen_cahn_eigenvalues_and_nonlinearity() {
        let spec = builtin_model(
            "allen_cahn",
            &Params::new().set_num("N", 16.0).set_num("beta1", 1.0),
        )
        .unwrap();
        let ModelKind::Spde(m) = &spec.kind else {
            panic!("expected spde")
        };
        for (j, &l) in m.eigenvalues.iter().enumerate() {
            let expect = ((j as f64 + 1.0) * std::f64::consts::PI).powi(2);
            assert!((l - expect).abs() < 1e-9);
        }
        // f(u) = u − u³ through the collocation route: evaluate on a
        // pure-mode state and compare the physical values.
        let mut modes = vec![0.0; 16];
        modes[0] = 0.3;
        let mut phys = vec![0.0; 33];
        m.grid_values(&modes, &mut phys);
        let mut f_modes = vec![0.0; 16];
        m.nonlinearity_modes(&modes, &mut f_modes);
        let mut back = vec![0.0; 33];
        m.grid_values(&f_modes, &mut back);
        // Pure mode-1 input: the cubic only excites modes 1 and 3, both
        // resolved; physical values must agree pointwise.
        for (i, &u) in phys.iter().enumerate() {
            assert!((back[i] - (u - u * u * u)).abs() < 1e-10, "grid point {i}");
        }
    }

    #[test]
    fn drift_sampled_inequalities_hold_for_builtins() {
        // 10⁴ pairs per model family in the test box.
        for (name, params) in [
            ("ou", ou_params()),
            ("double_well", Params::new().set_num("sigma", 1.0)),
        ] {
            let spec = builtin_model(name, &params).unwrap();
            let ModelKind::Sode(m) = &spec.kind else {
                unreachable!()
            };
            m.check_drift_inequalities(10_000, 3.0, 777)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn wrong_dissipativity_claim_is_caught() {
        // Claim the double-well drift contracts pointwise: false.
        let drift: VecField = Arc::new(|x: &[f64], out: &mut [f64]| {
            out[0] = x[0] - x[0] * x[0] * x[0];
        });
        let diffusion: VecField = Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 1.0);
        let err = SodeModel::new(
            1,
            1,
            drift,
            None,
            diffusion,
            -0.5,
            Dissipativity {
                rate: 1.0,
                offset: 1.0,
            },
            3,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::InvariantViolated(_)));
    }

    #[test]
    fn finite_difference_jacobian_matches_closed_form() {
        let spec = builtin_model("double_well", &Params::new()).unwrap();
        let ModelKind::Sode(m) = &spec.kind else {
            unreachable!()
        };
        let drift: VecField = Arc::new(|x: &[f64], out: &mut [f64]| {
            out[0] = x[0] - x[0] * x[0] * x[0];
        });
        let diffusion: VecField = Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 1.0);
        let fd_model = SodeModel::new(
            1,
            1,
            drift,
            None,
            diffusion,
            1.0,
            Dissipativity {
                rate: 1.0,
                offset: 1.0,
            },
            3,
        )
        .unwrap();
        let mut exact = [0.0];
        let mut approx = [0.0];
        for &x in &[-1.3, 0.0, 0.4, 2.2] {
            m.drift_jacobian(&[x], &mut exact);
            fd_model.drift_jacobian(&[x], &mut approx);
            assert!((exact[0] - approx[0]).abs() < 1e-5, "x = {x}");
        }
    }

    #[test]
    fn spde_projection_is_idempotent_on_truncated_states() {
        let spec = builtin_model(
            "allen_cahn",
            &Params::new().set_num("N", 8.0).set_num("beta1", 1.0),
        )
        .unwrap();
        let ModelKind::Spde(m) = &spec.kind else {
            unreachable!()
        };
        let stream = NoiseStream::new(3, 0, PURPOSE_VALIDATION);
        let mut modes = vec![0.0; 8];
        for (j, v) in modes.iter_mut().enumerate() {
            *v = 0.5 * stream.normal(0, j as u64);
        }
        // The collocation operator already lands in the truncated space:
        // applying it to its own output's projection changes nothing.
        let mut once = vec![0.0; 8];
        m.nonlinearity_modes(&modes, &mut once);
        let mut twice = vec![0.0; 8];
        m.nonlinearity_modes(&modes, &mut twice);
        assert_eq!(once, twice);
        assert_eq!(once.len(), m.n_modes);
    }

    #[test]
    fn spde_regularity_sum_is_checked() {
        // q_j ≡ 1 with β₁ = 0.5 gives Σ λ_j^{−1/2} q_j ≈ Σ 1/(jπ): small
        // for N=4, but a bound of 0.1 must reject it.
        let eigenvalues: Vec<f64> = (1..=4)
            .map(|j| (j as f64 * std::f64::consts::PI).powi(2))
            .collect();
        let err = SpectralSpdeModel::new(eigenvalues, vec![1.0; 4], 0.0, 0.5, None, None, 0.1)
            .unwrap_err();
        assert!(matches!(err, ModelError::InvariantViolated(_)));
    }

    fn delay_params() -> Params {
        Params::new()
            .set_num("a", 2.0)
            .set_num("b", 0.5)
            .set_num("delta0", 1.0)
            .set_num("Nseg", 20.0)
            .set_num("sigma", 0.3)
    }

    #[test]
    fn linear_delay_constants_read_off_the_functional() {
        let spec = builtin_model("linear_delay", &delay_params()).unwrap();
        let ModelKind::Sfde(m) = &spec.kind else {
            panic!("expected sfde")
        };
        assert_eq!(m.constants.l3, 2.0);
        assert!(m.constants.l3 > m.constants.l1 + m.constants.l4);
        assert_eq!(m.segment_tau(), 0.05);
        // τ · n_seg reproduces δ₀ exactly in the stored rational form.
        assert_eq!(m.segment_tau() * m.n_seg as f64, m.delay);
    }

    #[test]
    fn dissipativity_gap_is_a_constructor_gate() {
        // l3 below l1 + l4 must fail before any sampling.
        let nodes = 21;
        let mut nu = vec![0.0; nodes];
        nu[nodes - 1] = 1.0;
        let err = SfdeModel::new(
            1,
            1,
            1.0,
            20,
            SfdeDrift::Linear { a: 0.3, b: 0.5 },
            SfdeDiffusion::Constant(0.3),
            nu.clone(),
            nu,
            HypothesisConstants {
                l1: 0.1,
                l2: 0.3,
                l3: 0.3,
                l4: 0.5,
                l5: 1.0,
                l6: 1.0,
                holder_exponent: 1.0,
            },
            vec![1.0; nodes],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::InvariantViolated(_)));
    }

    #[test]
    fn hypothesis_validation_passes_for_linear_delay() {
        let spec = builtin_model("linear_delay", &delay_params()).unwrap();
        let ModelKind::Sfde(m) = &spec.kind else {
            unreachable!()
        };
        let report = validate_hypotheses(m, 1000, 2.0, 99);
        assert!(report.pass, "report: {report:?}");
        assert!(report.h1_worst <= 1.0 + report.tolerance);
        assert!(report.h2_worst <= 1.0 + report.tolerance);
        assert!(report.h3_worst <= 1.0 + report.tolerance);
    }

    #[test]
    fn unbounded_diffusion_fails_the_bound_hypothesis() {
        // σ(φ) = φ(0) with declared bound l2 = 1, sampled in a box of
        // radius 2: the bound ratio approaches 2.
        let spec = builtin_model("linear_delay", &delay_params()).unwrap();
        let ModelKind::Sfde(m) = &spec.kind else {
            unreachable!()
        };
        let bad = SfdeModel::new(
            1,
            1,
            m.delay,
            m.n_seg,
            SfdeDrift::Linear { a: 2.0, b: 0.5 },
            SfdeDiffusion::Custom(Arc::new(|seg: &SegmentNodes<'_>, out: &mut [f64]| {
                out[0] = seg.head()[0];
            })),
            m.nu1.clone(),
            m.nu2.clone(),
            HypothesisConstants {
                l2: 1.0,
                ..m.constants
            },
            m.initial_segment.clone(),
        )
        .unwrap();
        let report = validate_hypotheses(&bad, 1000, 2.0, 99);
        assert!(!report.pass);
        assert!(report.h1_worst > 1.5, "h1 worst = {}", report.h1_worst);
    }

    #[test]
    fn meta_validation_rejects_bad_exponents() {
        let mut meta = exponential_meta((1.0, 0.5), None);
        meta.validate(false).unwrap();
        meta.gamma2 = 0.0;
        assert!(meta.validate(false).is_err());
        let mut meta2 = exponential_meta((0.0, 0.5), None);
        assert!(meta2.validate(true).is_err());
        meta2.alpha.0 = 1.0;
        meta2.validate(true).unwrap();
    }
}
