//! Error types shared by the simulation and estimation layers.

use std::fmt;

/// Errors raised by steppers, estimators, and measure utilities.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// Newton iteration did not reach the residual tolerance; usually a
    /// sign that the time step is too large for the drift's stiffness.
    NewtonDivergence { iters: u32, residual: f64 },
    /// A state entry left the finite range (|x| > 1e10 or non-finite).
    OverflowDetected { step: u64, value: f64 },
    /// Two states (or sample sets) that must have equal shape do not.
    ShapeMismatch { left: usize, right: usize },
    /// Coupled stepping requires both trajectories at the same step.
    ClockMismatch { left: u64, right: u64 },
    /// An estimator was asked for more data than the series contains.
    InsufficientData { needed: usize, got: usize },
    /// A scalar parameter is outside its admissible range.
    InvalidParam(String),
    /// Interpolation argument outside the delay window.
    OutOfWindow { theta: f64, delay: f64 },
    /// Scheme applied to a model family it does not discretize.
    SchemeModelMismatch { scheme: String, model: String },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::NewtonDivergence { iters, residual } => write!(
                f,
                "newton iteration diverged: residual {residual:.3e} after {iters} iterations"
            ),
            SimError::OverflowDetected { step, value } => {
                write!(f, "state overflow at step {step}: entry {value:.3e}")
            }
            SimError::ShapeMismatch { left, right } => {
                write!(f, "shape mismatch: {left} vs {right}")
            }
            SimError::ClockMismatch { left, right } => {
                write!(f, "coupled states at different steps: {left} vs {right}")
            }
            SimError::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need {needed}, got {got}")
            }
            SimError::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            SimError::OutOfWindow { theta, delay } => {
                write!(f, "lookback time {theta} outside [-{delay}, 0]")
            }
            SimError::SchemeModelMismatch { scheme, model } => {
                write!(
                    f,
                    "scheme `{scheme}` does not apply to model family `{model}`"
                )
            }
        }
    }
}

impl std::error::Error for SimError {}
