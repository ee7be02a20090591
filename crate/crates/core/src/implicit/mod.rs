//! Implicit differentiation through a discretized constraint `r(y, θ) = 0`.
//!
//! [`ImplicitProblem`] owns a [`PdeSystem`] and produces, for the reduced
//! objective `θ ↦ g(y(θ), θ)`:
//!
//! * the state `y(θ)` by damped Newton iteration,
//! * the adjoint `λ` from `(∂r/∂y)ᵀ λ = −(∂g/∂y)ᵀ`,
//! * the gradient `∂g/∂θ + λᵀ ∂r/∂θ`,
//! * Hessian-vector products from one incremental forward and one
//!   incremental adjoint solve, with all second-order terms evaluated by
//!   nested AD in a configurable [`CompositionMode`].
//!
//! The last converged state, its adjoint and the Jacobian factorization are
//! cached for a bit-identical `θ`, so repeated products at the same point
//! cost two linear solves each.

mod system;

use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

pub use system::{FemSystem, PdeSystem};

use crate::ad::CompositionMode;
use crate::fem::FemError;
use crate::math::norm_inf;
use crate::optimize::{EvalError, ReducedObjective};
use crate::sparse::{Factorization, SparseError};

/// Largest parameter dimension for which [`ImplicitProblem::full_hessian`]
/// will build a dense matrix.
pub const MAX_DENSE_HESSIAN: usize = 512;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImplicitError {
    #[error("Newton iteration stalled after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0} contains non-finite entries")]
    NonFinite(&'static str),
    #[error("dense Hessian of dimension {dim} exceeds the limit of {limit}")]
    HessianTooLarge { dim: usize, limit: usize },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

impl From<ImplicitError> for EvalError {
    fn from(e: ImplicitError) -> Self {
        EvalError(alloc::format!("{e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative tolerance: stop when `‖r‖∞ ≤ tol · max(1, ‖r(y₀)‖∞)`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Step halvings tried when a full Newton step does not reduce `‖r‖∞`.
    pub max_halvings: usize,
    pub mode: CompositionMode,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            newton_max_iter: 20,
            max_halvings: 10,
            mode: CompositionMode::default(),
        }
    }
}

/// Bookkeeping of one forward solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForwardStats {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.values)
    }

    /// `‖A − Aᵀ‖` in the max-entry norm.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                worst = worst.max(crate::math::abs(self.get(i, j) - self.get(j, i)));
            }
        }
        worst
    }
}

struct Workspace {
    theta: Vec<f64>,
    y: Vec<f64>,
    lambda: Option<Vec<f64>>,
    factorization: Factorization,
    stats: ForwardStats,
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Reduced problem `min_θ g(y(θ), θ)` subject to `r(y, θ) = 0`.
///
/// Not `Sync`: the solve cache uses interior mutability.
pub struct ImplicitProblem<S> {
    system: S,
    settings: SolverSettings,
    cache: RefCell<Option<Workspace>>,
    forward_solves: Cell<usize>,
    adjoint_solves: Cell<usize>,
}

impl<S: PdeSystem> ImplicitProblem<S> {
    pub fn new(system: S, settings: SolverSettings) -> Self {
        Self {
            system,
            settings,
            cache: RefCell::new(None),
            forward_solves: Cell::new(0),
            adjoint_solves: Cell::new(0),
        }
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn into_system(self) -> S {
        self.system
    }

    /// Mutable access drops the cached solve.
    pub fn system_mut(&mut self) -> &mut S {
        self.clear_cache();
        &mut self.system
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn set_mode(&mut self, mode: CompositionMode) {
        self.settings.mode = mode;
    }

    pub fn n_params(&self) -> usize {
        self.system.n_params()
    }

    pub fn n_state(&self) -> usize {
        self.system.n_state()
    }

    /// Number of nonlinear forward solves performed so far.
    pub fn forward_solves(&self) -> usize {
        self.forward_solves.get()
    }

    /// Number of adjoint solves performed so far.
    pub fn adjoint_solves(&self) -> usize {
        self.adjoint_solves.get()
    }

    pub fn reset_counters(&self) {
        self.forward_solves.set(0);
        self.adjoint_solves.set(0);
    }

    pub fn clear_cache(&self) {
        self.cache.replace(None);
    }

    /// Statistics of the forward solve currently held in the cache.
    pub fn last_forward_stats(&self) -> Option<ForwardStats> {
        self.cache.borrow().as_ref().map(|w| w.stats)
    }

    fn check_params(&self, what: &'static str, v: &[f64]) -> Result<(), ImplicitError> {
        let expected = self.system.n_params();
        if v.len() != expected {
            return Err(ImplicitError::Dimension {
                what,
                expected,
                got: v.len(),
            });
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(ImplicitError::NonFinite(what));
        }
        Ok(())
    }

    fn newton(&self, theta: &[f64]) -> Result<Workspace, ImplicitError> {
        let s = &self.settings;
        let mut y = self.system.initial_state();
        let mut r = self.system.residual(&y, theta)?;
        let mut rnorm = norm_inf(&r);
        let initial = rnorm;
        let tol = s.newton_tol * initial.max(1.0);
        let mut iterations = 0;
        loop {
            let jac = self.system.jacobian(&y, theta)?;
            let factorization = Factorization::new(&jac)?;
            if rnorm <= tol {
                self.forward_solves.set(self.forward_solves.get() + 1);
                return Ok(Workspace {
                    theta: theta.to_vec(),
                    y,
                    lambda: None,
                    factorization,
                    stats: ForwardStats {
                        iterations,
                        initial_residual: initial,
                        final_residual: rnorm,
                    },
                });
            }
            if iterations == s.newton_max_iter {
                return Err(ImplicitError::NoConvergence {
                    iterations,
                    residual: rnorm,
                });
            }
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let dy = factorization.solve(&neg)?;
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=s.max_halvings {
                let trial: Vec<f64> = y.iter().zip(&dy).map(|(a, d)| a + step * d).collect();
                // overflow in a trial step just means the step is too long
                if let Ok(rt) = self.system.residual(&trial, theta) {
                    let n = norm_inf(&rt);
                    if n < rnorm {
                        accepted = Some((trial, rt, n));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((trial, rt, n)) = accepted else {
                return Err(ImplicitError::NoConvergence {
                    iterations,
                    residual: rnorm,
                });
            };
            y = trial;
            r = rt;
            rnorm = n;
            iterations += 1;
        }
    }

    /// Runs `f` on the cached workspace for `theta`, solving first if needed.
    fn with_workspace<R>(
        &self,
        theta: &[f64],
        need_adjoint: bool,
        f: impl FnOnce(&Workspace) -> Result<R, ImplicitError>,
    ) -> Result<R, ImplicitError> {
        self.check_params("parameter", theta)?;
        let mut cache = self.cache.borrow_mut();
        if !cache.as_ref().is_some_and(|w| same_bits(&w.theta, theta)) {
            *cache = None;
            *cache = Some(self.newton(theta)?);
        }
        let ws = cache.as_mut().expect("cache filled above");
        if need_adjoint && ws.lambda.is_none() {
            let (gy, _) = self.system.objective_gradient(&ws.y, theta)?;
            let rhs: Vec<f64> = gy.iter().map(|v| -v).collect();
            ws.lambda = Some(ws.factorization.solve_transpose(&rhs)?);
            self.adjoint_solves.set(self.adjoint_solves.get() + 1);
        }
        f(ws)
    }

    /// State `y(θ)` with `‖r(y, θ)‖∞` below the Newton tolerance.
    pub fn solve_forward(&self, theta: &[f64]) -> Result<Vec<f64>, ImplicitError> {
        self.with_workspace(theta, false, |w| Ok(w.y.clone()))
    }

    /// Adjoint `λ` at the converged state for `θ`.
    pub fn solve_adjoint(&self, theta: &[f64]) -> Result<Vec<f64>, ImplicitError> {
        self.with_workspace(theta, true, |w| Ok(w.lambda.clone().unwrap_or_default()))
    }

    /// Reduced objective `g(y(θ), θ)`.
    pub fn objective(&self, theta: &[f64]) -> Result<f64, ImplicitError> {
        self.with_workspace(theta, false, |w| self.system.objective(&w.y, theta))
    }

    /// `dg/dθ = ∂g/∂θ + λᵀ ∂r/∂θ`.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>, ImplicitError> {
        self.with_workspace(theta, true, |w| {
            let lambda = w.lambda.as_deref().unwrap_or_default();
            let (_, mut g) = self.system.objective_gradient(&w.y, theta)?;
            let (_, lr) = self.system.residual_vjp(&w.y, theta, lambda)?;
            for (a, b) in g.iter_mut().zip(&lr) {
                *a += b;
            }
            Ok(g)
        })
    }

    /// Hessian-vector product in the configured composition mode.
    pub fn hvp(&self, theta: &[f64], direction: &[f64]) -> Result<Vec<f64>, ImplicitError> {
        self.hvp_in_mode(theta, direction, self.settings.mode)
    }

    /// Hessian-vector product `(d²g/dθ²) θ̂` in the given composition mode.
    pub fn hvp_in_mode(
        &self,
        theta: &[f64],
        direction: &[f64],
        mode: CompositionMode,
    ) -> Result<Vec<f64>, ImplicitError> {
        self.check_params("direction", direction)?;
        let sys = &self.system;
        self.with_workspace(theta, true, |w| {
            let y = &w.y;
            let lambda = w.lambda.as_deref().unwrap_or_default();

            // incremental forward: J ŷ = −∂r/∂θ θ̂
            let mut rhs = sys.residual_param_jvp(y, theta, direction)?;
            rhs.iter_mut().for_each(|v| *v = -*v);
            let y_hat = w.factorization.solve(&rhs)?;

            // second derivatives of g and λᵀr along (ŷ, 0) and (0, θ̂)
            let (r_yy, r_ty) = sys.residual_second_order(y, theta, mode, lambda, &y_hat, &[])?;
            let (r_yt, r_tt) = sys.residual_second_order(y, theta, mode, lambda, &[], direction)?;
            let (g_yy, g_ty) = sys.objective_second_order(y, theta, mode, &y_hat, &[])?;
            let (g_yt, g_tt) = sys.objective_second_order(y, theta, mode, &[], direction)?;

            // incremental adjoint: Jᵀ λ̂ = −(state parts)
            let rhs: Vec<f64> = (0..y.len())
                .map(|i| -(g_yy[i] + r_yy[i] + g_yt[i] + r_yt[i]))
                .collect();
            let lambda_hat = w.factorization.solve_transpose(&rhs)?;
            let (_, l_hat_t) = sys.residual_vjp(y, theta, &lambda_hat)?;

            Ok((0..theta.len())
                .map(|k| g_tt[k] + r_tt[k] + g_ty[k] + r_ty[k] + l_hat_t[k])
                .collect())
        })
    }

    /// Central difference of gradients, `(∇g(θ + hθ̂) − ∇g(θ − hθ̂)) / 2h`.
    pub fn fd_hvp(&self, theta: &[f64], direction: &[f64], h: f64) -> Result<Vec<f64>, ImplicitError> {
        self.check_params("direction", direction)?;
        let shifted = |s: f64| -> Vec<f64> {
            theta.iter().zip(direction).map(|(t, d)| t + s * d).collect()
        };
        let plus = self.gradient(&shifted(h))?;
        let minus = self.gradient(&shifted(-h))?;
        Ok(plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect())
    }

    /// Dense Hessian assembled column by column from [`hvp`](Self::hvp).
    pub fn full_hessian(&self, theta: &[f64]) -> Result<DenseMatrix, ImplicitError> {
        let m = self.n_params();
        if m > MAX_DENSE_HESSIAN {
            return Err(ImplicitError::HessianTooLarge {
                dim: m,
                limit: MAX_DENSE_HESSIAN,
            });
        }
        let mut h = DenseMatrix::zeros(m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let col = self.hvp(theta, &e)?;
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                h.set(i, j, v);
            }
        }
        Ok(h)
    }
}

impl<S: PdeSystem> ReducedObjective for ImplicitProblem<S> {
    fn dim(&self) -> usize {
        self.n_params()
    }

    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.objective(x)?)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(ImplicitProblem::gradient(self, x)?)
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(ImplicitProblem::hvp(self, x, v)?)
    }
}

/// Wraps a problem so that its Hessian-vector products come from central
/// differences of gradients with step `h`.
pub struct FdHessian<'a, S> {
    pub problem: &'a ImplicitProblem<S>,
    pub h: f64,
}

impl<S: PdeSystem> ReducedObjective for FdHessian<'_, S> {
    fn dim(&self) -> usize {
        self.problem.n_params()
    }

    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.problem.objective(x)?)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.problem.gradient(x)?)
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.problem.fd_hvp(x, v, self.h)?)
    }
}
