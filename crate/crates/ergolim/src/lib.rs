//! Stochastic-numerics toolkit for long-time simulation of dissipative
//! SDE systems and empirical verification of the probabilistic limit
//! behavior of their time-averaging estimators.
//!
//! The library covers three model families (finite-dimensional SODEs,
//! spectral truncations of semilinear SPDEs, and delay equations with a
//! segment state), the one-step schemes used to discretize them, and the
//! statistical machinery needed to test that time averages of a
//! discretized trajectory obey a law of large numbers and a central
//! limit theorem with the predicted asymptotic variance:
//!
//! ```text
//! (1/k) Σ f(Y_i)                    → μ(f)        (LLN)
//! √(τ/k) Σ (f(Y_i) − μ(f))          → N(0, v²)    (CLT)
//! v² = τ·c₀ + 2τ·Σ_{j≥1} c_j        (integrated autocovariance)
//! ```
//!
//! Modules:
//! - [`rng`]: counter-based noise streams, reproducible under any
//!   parallel execution order.
//! - [`models`]: model definitions, growth/mixing metadata, and
//!   Monte-Carlo validation of the structural hypotheses of the delay
//!   family.
//! - [`schemes`]: one-step maps (implicit and explicit), coupled
//!   two-trajectory stepping with shared noise.
//! - [`functionals`]: the weighted-Hölder test-functional class, its
//!   quasi-metric, and empirical norm estimation.
//! - [`measures`]: empirical-measure queries, 1-D Wasserstein
//!   distances, mixing-rate fits, closed-form oracles.
//! - [`estimators`]: time averages, CLT statistics, parameter
//!   couplings, and three asymptotic-variance estimators.
//! - [`assumptions`]: empirical moment-bound, contraction, and
//!   strong-order checks for a (model, scheme, step-size) triple.
//! - [`stats`]: normal CDF/quantile, Kolmogorov–Smirnov test, QQ data.
//! - [`harness`]: experiment configuration, deterministic replica
//!   parallelism, pipelines, and JSON/CSV reports.

// Numeric range guards use the `!(x > 0.0)` form on purpose: it
// rejects NaN together with the out-of-range values, which the
// suggested `x <= 0.0` would let through. Kernels index with loop
// counters where the subscripts mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod assumptions;
pub mod error;
pub mod estimators;
pub mod functionals;
pub mod harness;
pub mod measures;
pub mod models;
pub(crate) mod numutil;
pub mod rng;
pub mod schemes;
pub mod stats;

pub use error::SimError;
