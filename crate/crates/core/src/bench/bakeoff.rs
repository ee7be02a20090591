use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, BenchmarkSpec};
use crate::implicit::{FdHessian, ImplicitProblem, PdeSystem};
use crate::math::sqrt;
use crate::optimize::{
    minimize_lbfgs, minimize_newton_cg, Clock, OptimizeResult, OptimizeSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Lbfgs,
    /// Newton-CG with exact Hessian-vector products.
    NewtonCgAd,
    /// Newton-CG with central-difference Hessian-vector products.
    NewtonCgFd,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [
        OptimizerKind::Lbfgs,
        OptimizerKind::NewtonCgAd,
        OptimizerKind::NewtonCgFd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Lbfgs => "lbfgs",
            OptimizerKind::NewtonCgAd => "newton-cg-ad",
            OptimizerKind::NewtonCgFd => "newton-cg-fd",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| BenchError::UnknownOptimizer(s.into()))
    }
}

/// Step used by [`OptimizerKind::NewtonCgFd`].
pub const FD_HVP_STEP: f64 = 1e-3;

/// Result of one inverse run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerRun {
    pub optimizer: OptimizerKind,
    pub result: OptimizeResult,
    /// State predicted by the recovered parameters.
    pub predicted: Vec<f64>,
    /// Relative error of the recovered parameters against the reference.
    pub parameter_error: f64,
}

/// Runs one optimizer from `theta0` and solves the forward problem at the
/// final iterate.
pub fn run_optimizer<S: PdeSystem>(
    p: &ImplicitProblem<S>,
    spec: &BenchmarkSpec,
    optimizer: OptimizerKind,
    theta0: &[f64],
    settings: &OptimizeSettings,
    clock: &dyn Clock,
) -> Result<OptimizerRun, BenchError> {
    let result = match optimizer {
        OptimizerKind::Lbfgs => minimize_lbfgs(p, theta0, settings, clock)?,
        OptimizerKind::NewtonCgAd => minimize_newton_cg(p, theta0, settings, clock)?,
        OptimizerKind::NewtonCgFd => {
            let fd = FdHessian {
                problem: p,
                h: FD_HVP_STEP,
            };
            minimize_newton_cg(&fd, theta0, settings, clock)?
        }
    };
    let predicted = p.solve_forward(&result.x)?;
    let parameter_error = relative_l2_error(&result.x, &spec.reference, |_| true);
    Ok(OptimizerRun {
        optimizer,
        result,
        predicted,
        parameter_error,
    })
}

/// Relative error `‖a − b‖ / ‖b‖` over the entries `keep` selects. On the
/// uniform benchmark meshes all quadrature weights are equal, so this is
/// also the relative L2 error of the fields.
pub fn relative_l2_error(a: &[f64], b: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in (0..a.len()).filter(|&i| keep(i)) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    sqrt(num / den)
}
