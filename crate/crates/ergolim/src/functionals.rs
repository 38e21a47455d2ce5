//! Test functionals of polynomial growth and weighted Hölder
//! regularity, the quasi-metric that defines their norm, and empirical
//! estimation of that norm over sample clouds.
//!
//! The functional class is normed by
//!
//! ```text
//! ‖f‖ = sup_u |f(u)| / (1 + ‖u‖^{p/2})
//!     + sup_{u₁≠u₂} |f(u₁) − f(u₂)| / d_{p,γ}(u₁, u₂),
//! d_{p,γ}(u₁,u₂) = (1 ∧ ‖u₁−u₂‖^γ) · (1 + ‖u₁‖^p + ‖u₂‖^p)^{1/2}.
//! ```
//!
//! Both suprema over an unbounded space are uncomputable, so
//! [`estimate_pg_norm`] reports an empirical lower bound: the growth
//! term maximized over a sample cloud and the Hölder term maximized
//! over sampled pairs (a mix of far pairs from the cloud and small
//! perturbations of cloud points, since either regime can attain the
//! supremum).

use std::sync::Arc;

use crate::error::SimError;
use crate::measures::EmpiricalMeasure;
use crate::numutil::norm2;
use crate::rng::{NoiseStream, PURPOSE_PAIRS};
use crate::schemes::StateValue;

/// A scalar test functional with declared growth exponent `p ≥ 1` and
/// Hölder exponent `γ ∈ (0,1]`, plus the exact ergodic limit when the
/// paired model has one in closed form.
#[derive(Clone)]
pub struct TestFunctional {
    pub name: String,
    pub p: f64,
    pub gamma: f64,
    pub known_limit: Option<f64>,
    eval: Arc<dyn Fn(&StateValue) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TestFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunctional")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("gamma", &self.gamma)
            .field("known_limit", &self.known_limit)
            .finish()
    }
}

impl TestFunctional {
    pub fn new(
        name: &str,
        p: f64,
        gamma: f64,
        eval: Arc<dyn Fn(&StateValue) -> f64 + Send + Sync>,
    ) -> Result<Self, SimError> {
        if !(p >= 1.0) {
            return Err(SimError::InvalidParam(format!(
                "growth exponent p must be ≥ 1, got {p}"
            )));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(SimError::InvalidParam(format!(
                "Hölder exponent must lie in (0,1], got {gamma}"
            )));
        }
        let f = TestFunctional {
            name: name.into(),
            p,
            gamma,
            known_limit: None,
            eval,
        };
        let probe = f.eval(&StateValue::Vector(vec![0.0]));
        if !probe.is_finite() {
            return Err(SimError::InvalidParam(
                "functional not finite at the origin".into(),
            ));
        }
        Ok(f)
    }

    pub fn with_limit(mut self, limit: f64) -> Self {
        self.known_limit = Some(limit);
        self
    }

    pub fn eval(&self, state: &StateValue) -> f64 {
        (self.eval)(state)
    }
}

/// The clamped, growth-weighted quasi-metric
/// `d = (1 ∧ ‖u₁−u₂‖^γ)(1 + ‖u₁‖^p + ‖u₂‖^p)^{1/2}`.
pub fn quasi_metric(u1: &[f64], u2: &[f64], p: f64, gamma: f64) -> Result<f64, SimError> {
    if u1.len() != u2.len() {
        return Err(SimError::ShapeMismatch {
            left: u1.len(),
            right: u2.len(),
        });
    }
    let diff: f64 = u1
        .iter()
        .zip(u2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let clamp = diff.powf(gamma).min(1.0);
    let weight = (1.0 + norm2(u1).powf(p) + norm2(u2).powf(p)).sqrt();
    Ok(clamp * weight)
}

/// Construct a builtin functional by name.
///
/// - `coordinate` (param `i`): x ↦ x_i, p = 2.
/// - `norm_sq`: x ↦ ‖x‖² (Parseval sum of squares for mode vectors),
///   p = 4.
/// - `segment_head`: φ ↦ φ(0) (newest node, first component).
/// - `segment_mean`: φ ↦ trapezoidal average of φ over the window.
/// - `holder_clip` (params `i`, `gamma`): x ↦ (1 ∧ |x_i|^γ)·sign(x_i),
///   a bounded low-regularity functional.
pub fn builtin_functional(
    name: &str,
    int_param: Option<usize>,
    gamma_param: Option<f64>,
) -> Result<TestFunctional, SimError> {
    match name {
        "coordinate" => {
            let i = int_param.unwrap_or(0);
            TestFunctional::new(
                "coordinate",
                2.0,
                1.0,
                Arc::new(move |s: &StateValue| match s {
                    StateValue::Vector(v) => v.get(i).copied().unwrap_or(f64::NAN),
                    StateValue::Segment(seg) => seg.head().get(i).copied().unwrap_or(f64::NAN),
                }),
            )
        }
        "norm_sq" => TestFunctional::new(
            "norm_sq",
            4.0,
            1.0,
            Arc::new(|s: &StateValue| match s {
                StateValue::Vector(v) => v.iter().map(|x| x * x).sum(),
                StateValue::Segment(seg) => seg.head().iter().map(|x| x * x).sum(),
            }),
        ),
        "segment_head" => TestFunctional::new(
            "segment_head",
            2.0,
            1.0,
            Arc::new(|s: &StateValue| match s {
                StateValue::Segment(seg) => seg.head()[0],
                StateValue::Vector(v) => v[0],
            }),
        ),
        "segment_mean" => TestFunctional::new(
            "segment_mean",
            2.0,
            1.0,
            Arc::new(|s: &StateValue| match s {
                StateValue::Segment(seg) => {
                    // Trapezoid weights over the uniform node grid.
                    let n = seg.n_seg;
                    let mut acc = 0.5 * (seg.node(0)[0] + seg.node(n)[0]);
                    for i in 1..n {
                        acc += seg.node(i)[0];
                    }
                    acc / n as f64
                }
                StateValue::Vector(v) => v[0],
            }),
        ),
        "holder_clip" => {
            let i = int_param.unwrap_or(0);
            let g = gamma_param.unwrap_or(0.5);
            if !(g > 0.0 && g <= 1.0) {
                return Err(SimError::InvalidParam(format!(
                    "holder_clip gamma must lie in (0,1], got {g}"
                )));
            }
            let f = TestFunctional::new(
                "holder_clip",
                2.0,
                g,
                Arc::new(move |s: &StateValue| {
                    let x = match s {
                        StateValue::Vector(v) => v.get(i).copied().unwrap_or(0.0),
                        StateValue::Segment(seg) => seg.head().get(i).copied().unwrap_or(0.0),
                    };
                    x.abs().powf(g).min(1.0) * x.signum()
                }),
            )?;
            Ok(f)
        }
        other => Err(SimError::InvalidParam(format!(
            "unknown functional `{other}`"
        ))),
    }
}

/// The two norm terms evaluated over an explicit cloud and an explicit
/// pair list: (growth supremum, Hölder supremum). Pairs with zero
/// quasi-metric are skipped.
pub fn pg_norm_terms(
    f: &TestFunctional,
    cloud: &[Vec<f64>],
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<(f64, f64), SimError> {
    let mut growth: f64 = 0.0;
    for point in cloud {
        let state = StateValue::Vector(point.clone());
        let val = f.eval(&state).abs();
        growth = growth.max(val / (1.0 + norm2(point).powf(f.p / 2.0)));
    }
    let mut holder: f64 = 0.0;
    for (u1, u2) in pairs {
        let d = quasi_metric(u1, u2, f.p, f.gamma)?;
        if d == 0.0 {
            continue;
        }
        let df = (f.eval(&StateValue::Vector(u1.clone()))
            - f.eval(&StateValue::Vector(u2.clone())))
        .abs();
        holder = holder.max(df / d);
    }
    Ok((growth, holder))
}

/// Empirical lower bound of the functional norm over a sample cloud:
/// growth term maximized over the cloud, Hölder term maximized over
/// `pairs` sampled pairs. Half the pairs are distinct cloud points,
/// half are perturbations of a cloud point at scales 1e-3 .. 1e-1.
/// Monotone nondecreasing in `pairs` for a fixed seed family.
pub fn estimate_pg_norm(
    f: &TestFunctional,
    cloud: &EmpiricalMeasure,
    pairs: usize,
    seed: u64,
) -> Result<f64, SimError> {
    let points = cloud.samples();
    if points.is_empty() {
        return Err(SimError::InsufficientData { needed: 1, got: 0 });
    }
    let stream = NoiseStream::new(seed, 0, PURPOSE_PAIRS);
    let n = points.len();
    let dim = points[0].len();
    let mut pair_list = Vec::with_capacity(pairs);
    for s in 0..pairs as u64 {
        let i = (stream.uniform(s, 0) * n as f64) as usize % n;
        if s % 2 == 0 && n > 1 {
            // Far pair: two distinct cloud points.
            let mut j = (stream.uniform(s, 1) * n as f64) as usize % n;
            if j == i {
                j = (j + 1) % n;
            }
            pair_list.push((points[i].clone(), points[j].clone()));
        } else {
            // Near pair: perturb one point at a log-uniform scale.
            let scale = 10f64.powf(-3.0 + 2.0 * stream.uniform(s, 2));
            let mut dir: Vec<f64> = (0..dim).map(|c| stream.normal(s, 3 + c as u64)).collect();
            let len = norm2(&dir).max(1e-300);
            dir.iter_mut().for_each(|v| *v *= scale / len);
            let moved: Vec<f64> = points[i].iter().zip(&dir).map(|(a, b)| a + b).collect();
            pair_list.push((points[i].clone(), moved));
        }
    }
    let (growth, holder) = pg_norm_terms(f, points, &pair_list)?;
    Ok(growth + holder)
}
