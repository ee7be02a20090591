//! Derivative-based minimizers: L-BFGS and truncated Newton-CG, both with a
//! strong-Wolfe line search.
//!
//! Objectives are supplied through [`ReducedObjective`]. Failures after the
//! starting point (line search giving up, an evaluation error inside the
//! inner CG loop) end the run with a [`Status`] instead of an error, so a
//! non-converging method still yields its iterate history.

mod lbfgs;
mod line_search;
mod newton_cg;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use lbfgs::minimize_lbfgs;
pub use line_search::{strong_wolfe, LineSearchPoint};
pub use newton_cg::{minimize_newton_cg, truncated_cg, CgStep};

/// Error raised by an objective callback.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct EvalError(pub String);

/// Smooth objective with first and (optionally) second derivatives.
pub trait ReducedObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64, EvalError>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError>;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        Ok((self.value(x)?, self.gradient(x)?))
    }

    /// Hessian-vector product. Only Newton-CG calls this.
    fn hvp(&self, _x: &[f64], _v: &[f64]) -> Result<Vec<f64>, EvalError> {
        Err(EvalError("objective provides no Hessian-vector product".into()))
    }
}

/// Wall-clock source for [`IterationRecord::elapsed_s`].
pub trait Clock {
    /// Seconds since the start of the run.
    fn elapsed_s(&self) -> f64;
}

/// Clock that always reads zero; keeps records bit-reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn elapsed_s(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    pub max_iter: usize,
    /// Stop once `‖∇f‖∞` is at or below this.
    pub grad_tol: f64,
    pub cg_max_iter: usize,
    pub cg_forcing: f64,
    pub lbfgs_memory: usize,
    pub c1: f64,
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-8,
            cg_max_iter: 200,
            cg_forcing: 0.5,
            lbfgs_memory: 10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

impl OptimizeSettings {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(OptimizeError::InvalidSettings("need 0 < c1 < c2 < 1"));
        }
        if self.lbfgs_memory == 0 {
            return Err(OptimizeError::InvalidSettings("lbfgs memory must be at least 1"));
        }
        if self.max_line_search == 0 {
            return Err(OptimizeError::InvalidSettings("line search needs at least one evaluation"));
        }
        if !(self.grad_tol >= 0.0 && self.cg_forcing > 0.0) {
            return Err(OptimizeError::InvalidSettings("tolerances must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizeError {
    #[error("invalid settings: {0}")]
    InvalidSettings(&'static str),
    #[error("starting point has length {got}, objective expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("objective failed at the starting point: {0}")]
    Start(EvalError),
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub elapsed_s: f64,
    pub objective: f64,
    pub grad_norm: f64,
    /// Hessian-vector products used to produce this iterate.
    pub n_hvp_calls: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
    EvaluationFailed,
}

impl Status {
    pub fn is_converged(self) -> bool {
        self == Status::Converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub status: Status,
    /// Details when the run ended on a failed evaluation.
    pub message: Option<String>,
    pub records: Vec<IterationRecord>,
}

fn start(
    obj: &dyn ReducedObjective,
    x0: &[f64],
    settings: &OptimizeSettings,
) -> Result<(f64, Vec<f64>), OptimizeError> {
    settings.validate()?;
    if x0.len() != obj.dim() {
        return Err(OptimizeError::Dimension {
            expected: obj.dim(),
            got: x0.len(),
        });
    }
    obj.value_and_gradient(x0).map_err(OptimizeError::Start)
}
