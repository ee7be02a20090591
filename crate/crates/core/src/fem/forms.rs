use super::{DensityPoint, ObjectiveDensity, PointState, WeakForm};
use crate::ad::Scalar;

/// `∫ ∇u·∇v − ∫ b v − ∫_ΓN t v` with `b` taken from the input data.
/// Independent of the parameter slot.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearPoisson {
    pub traction: Option<fn([f64; 2]) -> f64>,
}

impl WeakForm for LinearPoisson {
    fn flux<S: Scalar>(&self, p: &PointState<S>) -> [S; 2] {
        p.grad_u
    }

    fn source<S: Scalar>(&self, p: &PointState<S>) -> S {
        S::from_f64(p.data)
    }

    fn traction(&self, coord: [f64; 2]) -> f64 {
        self.traction.map_or(0.0, |t| t(coord))
    }
}

/// Linear Poisson whose source field is the parameter:
/// `∫ ∇u·∇v − ∫ θ v`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SourceField;

impl WeakForm for SourceField {
    fn flux<S: Scalar>(&self, p: &PointState<S>) -> [S; 2] {
        p.grad_u
    }

    fn source<S: Scalar>(&self, p: &PointState<S>) -> S {
        p.theta
    }
}

/// `∫ exp(θu) ∇u·∇v − ∫ b v − ∫_ΓN t v`, `b` from the input data.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonlinearPoisson {
    pub traction: Option<fn([f64; 2]) -> f64>,
}

impl WeakForm for NonlinearPoisson {
    fn flux<S: Scalar>(&self, p: &PointState<S>) -> [S; 2] {
        let k = (p.theta * p.u).exp();
        [k * p.grad_u[0], k * p.grad_u[1]]
    }

    fn source<S: Scalar>(&self, p: &PointState<S>) -> S {
        S::from_f64(p.data)
    }

    fn traction(&self, coord: [f64; 2]) -> f64 {
        self.traction.map_or(0.0, |t| t(coord))
    }
}

/// `½ (u − u_obs)² + (α/2) θ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Misfit {
    pub alpha: f64,
}

impl ObjectiveDensity for L2Misfit {
    fn density<S: Scalar>(&self, p: &DensityPoint<S>) -> S {
        let d = p.u - S::from_f64(p.observed);
        let half = S::from_f64(0.5);
        half * d * d + S::from_f64(0.5 * self.alpha) * p.theta * p.theta
    }
}
