use alloc::boxed::Box;
use alloc::vec::Vec;

use super::ImplicitError;
use crate::ad::CompositionMode;
use crate::fem::{Discretization, ObjectiveDensity, WeakForm};
use crate::sparse::CsrMatrix;

type Pair = (Vec<f64>, Vec<f64>);

/// A discretized constraint `r(y, θ) = 0` together with an objective
/// `g(y, θ)`, exposing the first and second derivative products the implicit
/// solver needs.
///
/// Direction arguments may be passed as empty slices to mean zero.
/// Second-order methods return the state part and the parameter part of
/// `∂/∂(y, θ)` of the directional first derivative.
pub trait PdeSystem {
    fn n_state(&self) -> usize;
    fn n_params(&self) -> usize;
    /// Starting point for the nonlinear solve (must satisfy the constraints
    /// that are imposed row-wise, e.g. Dirichlet values).
    fn initial_state(&self) -> Vec<f64>;

    fn residual(&self, y: &[f64], theta: &[f64]) -> Result<Vec<f64>, ImplicitError>;
    fn jacobian(&self, y: &[f64], theta: &[f64]) -> Result<CsrMatrix, ImplicitError>;
    /// `∂r/∂θ · dθ`.
    fn residual_param_jvp(
        &self,
        y: &[f64],
        theta: &[f64],
        dtheta: &[f64],
    ) -> Result<Vec<f64>, ImplicitError>;
    /// `(wᵀ ∂r/∂y, wᵀ ∂r/∂θ)`.
    fn residual_vjp(&self, y: &[f64], theta: &[f64], w: &[f64]) -> Result<Pair, ImplicitError>;
    #[allow(clippy::too_many_arguments)]
    fn residual_second_order(
        &self,
        y: &[f64],
        theta: &[f64],
        mode: CompositionMode,
        w: &[f64],
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<Pair, ImplicitError>;

    fn objective(&self, y: &[f64], theta: &[f64]) -> Result<f64, ImplicitError>;
    fn objective_gradient(&self, y: &[f64], theta: &[f64]) -> Result<Pair, ImplicitError>;
    fn objective_second_order(
        &self,
        y: &[f64],
        theta: &[f64],
        mode: CompositionMode,
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<Pair, ImplicitError>;
}

impl<P: PdeSystem + ?Sized> PdeSystem for Box<P> {
    fn n_state(&self) -> usize {
        (**self).n_state()
    }
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn initial_state(&self) -> Vec<f64> {
        (**self).initial_state()
    }
    fn residual(&self, y: &[f64], theta: &[f64]) -> Result<Vec<f64>, ImplicitError> {
        (**self).residual(y, theta)
    }
    fn jacobian(&self, y: &[f64], theta: &[f64]) -> Result<CsrMatrix, ImplicitError> {
        (**self).jacobian(y, theta)
    }
    fn residual_param_jvp(
        &self,
        y: &[f64],
        theta: &[f64],
        dtheta: &[f64],
    ) -> Result<Vec<f64>, ImplicitError> {
        (**self).residual_param_jvp(y, theta, dtheta)
    }
    fn residual_vjp(&self, y: &[f64], theta: &[f64], w: &[f64]) -> Result<Pair, ImplicitError> {
        (**self).residual_vjp(y, theta, w)
    }
    fn residual_second_order(
        &self,
        y: &[f64],
        theta: &[f64],
        mode: CompositionMode,
        w: &[f64],
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<Pair, ImplicitError> {
        (**self).residual_second_order(y, theta, mode, w, dy, dtheta)
    }
    fn objective(&self, y: &[f64], theta: &[f64]) -> Result<f64, ImplicitError> {
        (**self).objective(y, theta)
    }
    fn objective_gradient(&self, y: &[f64], theta: &[f64]) -> Result<Pair, ImplicitError> {
        (**self).objective_gradient(y, theta)
    }
    fn objective_second_order(
        &self,
        y: &[f64],
        theta: &[f64],
        mode: CompositionMode,
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<Pair, ImplicitError> {
        (**self).objective_second_order(y, theta, mode, dy, dtheta)
    }
}

/// Finite-element constraint built from a weak form and an objective density
/// on a [`Discretization`].
#[derive(Debug, Clone)]
pub struct FemSystem<F, D> {
    pub disc: Discretization,
    pub form: F,
    pub density: D,
    /// Per-quadrature-point input data handed to the weak form.
    pub data: Vec<f64>,
    /// Nodal observation handed to the objective density (empty = none).
    pub observed: Vec<f64>,
}

impl<F: WeakForm, D: ObjectiveDensity> FemSystem<F, D> {
    pub fn new(disc: Discretization, form: F, density: D, data: Vec<f64>) -> Self {
        Self {
            disc,
            form,
            density,
            data,
            observed: Vec::new(),
        }
    }
}

impl<F: WeakForm, D: ObjectiveDensity> PdeSystem for FemSystem<F, D> {
    fn n_state(&self) -> usize {
        self.disc.n_dofs()
    }

    fn n_params(&self) -> usize {
        self.disc.n_params()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.disc.dirichlet_lift()
    }

    fn residual(&self, y: &[f64], theta: &[f64]) -> Result<Vec<f64>, ImplicitError> {
        Ok(self.disc.residual(&self.form, y, theta, &self.data)?)
    }

    fn jacobian(&self, y: &[f64], theta: &[f64]) -> Result<CsrMatrix, ImplicitError> {
        Ok(self.disc.jacobian(&self.form, y, theta, &self.data)?)
    }

    fn residual_param_jvp(
        &self,
        y: &[f64],
        theta: &[f64],
        dtheta: &[f64],
    ) -> Result<Vec<f64>, ImplicitError> {
        Ok(self
            .disc
            .residual_jvp(&self.form, y, theta, &self.data, &[], dtheta)?)
    }

    fn residual_vjp(&self, y: &[f64], theta: &[f64], w: &[f64]) -> Result<Pair, ImplicitError> {
        Ok(self.disc.residual_vjp(&self.form, y, theta, &self.data, w)?)
    }

    fn residual_second_order(
        &self,
        y: &[f64],
        theta: &[f64],
        mode: CompositionMode,
        w: &[f64],
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<Pair, ImplicitError> {
        Ok(self
            .disc
            .residual_second_order(&self.form, y, theta, &self.data, mode, w, dy, dtheta)?)
    }

    fn objective(&self, y: &[f64], theta: &[f64]) -> Result<f64, ImplicitError> {
        Ok(self.disc.integrate(&self.density, y, theta, &self.observed)?)
    }

    fn objective_gradient(&self, y: &[f64], theta: &[f64]) -> Result<Pair, ImplicitError> {
        Ok(self
            .disc
            .integrate_gradient(&self.density, y, theta, &self.observed)?)
    }

    fn objective_second_order(
        &self,
        y: &[f64],
        theta: &[f64],
        mode: CompositionMode,
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<Pair, ImplicitError> {
        Ok(self
            .disc
            .integrate_second_order(&self.density, y, theta, &self.observed, mode, dy, dtheta)?)
    }
}
