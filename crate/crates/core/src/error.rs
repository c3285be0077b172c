use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the sampling library and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot} has value {value:e} (threshold {threshold:e})")]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        threshold: f64,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: entry ({row}, {col}) differs by {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("finite-difference oracle hit a non-finite value at coordinate {coordinate}")]
    Oracle { coordinate: usize },

    #[error("point lies outside the domain of {family}")]
    Domain { family: &'static str },

    #[error("{family} is not differentiable at the origin")]
    NonDifferentiable { family: &'static str },

    #[error("{family} is degenerate at this point: {detail}")]
    Degenerate { family: &'static str, detail: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("gradient inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("gradient inversion could not take a step: backtracking fell below {min_step:e} (residual {residual:e})")]
    StepFailure { min_step: f64, residual: f64 },

    #[error("time step {dt:e} violates the stability bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },

    #[error("negative mass {mass:e} in cell {cell} at time {time}")]
    Stability { cell: usize, time: f64, mass: f64 },

    #[error("decay fit needs at least {needed} points in the window, found {found}")]
    Fit { needed: usize, found: usize },

    #[error("Gibbs kernel underflow (epsilon {epsilon:e}); use a larger epsilon or the log-domain mode")]
    KernelUnderflow { epsilon: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error for key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("unknown preset `{name}`; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("metric `{0}` is not part of the output contract")]
    UndeclaredMetric(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
