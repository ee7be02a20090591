use std::cell::Cell;

use proptest::prelude::*;

use hessfem_core::optimize::*;
use hessfem_core::math::{dot, norm2};

/// `½ xᵀ diag(scale) x`.
struct Quadratic {
    scale: Vec<f64>,
    hvps: Cell<usize>,
}

impl Quadratic {
    fn identity(n: usize) -> Self {
        Self {
            scale: vec![1.0; n],
            hvps: Cell::new(0),
        }
    }
}

impl ReducedObjective for Quadratic {
    fn dim(&self) -> usize {
        self.scale.len()
    }
    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(0.5 * x.iter().zip(&self.scale).map(|(v, s)| s * v * v).sum::<f64>())
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(x.iter().zip(&self.scale).map(|(v, s)| s * v).collect())
    }
    fn hvp(&self, _x: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.hvps.set(self.hvps.get() + 1);
        Ok(v.iter().zip(&self.scale).map(|(v, s)| s * v).collect())
    }
}

struct Rosenbrock;

impl ReducedObjective for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2))
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let t = x[1] - x[0] * x[0];
        Ok(vec![-400.0 * x[0] * t - 2.0 * (1.0 - x[0]), 200.0 * t])
    }
    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        let h00 = 1200.0 * x[0] * x[0] - 400.0 * x[1] + 2.0;
        let h01 = -400.0 * x[0];
        Ok(vec![h00 * v[0] + h01 * v[1], h01 * v[0] + 200.0 * v[1]])
    }
}

fn tight() -> OptimizeSettings {
    OptimizeSettings {
        grad_tol: 1e-10,
        max_iter: 500,
        ..OptimizeSettings::default()
    }
}

fn assert_descent(records: &[IterationRecord]) {
    for w in records.windows(2) {
        assert_eq!(w[1].iter, w[0].iter + 1);
        assert!(w[1].objective <= w[0].objective);
    }
}

#[test]
fn lbfgs_quadratic_few_iterations() {
    let q = Quadratic::identity(5);
    let r = minimize_lbfgs(&q, &[1.0; 5], &tight(), &NullClock).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(r.records.len() - 1 <= 3, "{} iterations", r.records.len() - 1);
    assert!(norm2(&r.x) < 1e-10);
}

#[test]
fn lbfgs_rosenbrock() {
    let r = minimize_lbfgs(&Rosenbrock, &[-1.2, 1.0], &tight(), &NullClock).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(norm2(&[r.x[0] - 1.0, r.x[1] - 1.0]) <= 1e-5);
    assert_descent(&r.records);
}

#[test]
fn newton_cg_rosenbrock() {
    let r = minimize_newton_cg(&Rosenbrock, &[-1.2, 1.0], &tight(), &NullClock).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(norm2(&[r.x[0] - 1.0, r.x[1] - 1.0]) <= 1e-5);
    assert_descent(&r.records);
    assert!(r.records[1..].iter().all(|rec| rec.n_hvp_calls >= 1));
}

#[test]
fn newton_cg_identity_single_step() {
    let q = Quadratic::identity(4);
    let r = minimize_newton_cg(&q, &[1.0, -2.0, 0.5, 3.0], &tight(), &NullClock).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert_eq!(r.records.len(), 2);
    assert_eq!(r.records[1].n_hvp_calls, 1);
    assert_eq!(q.hvps.get(), 1);
    assert_eq!(r.x, [0.0; 4]);
}

#[test]
fn cg_truncates_on_negative_curvature() {
    let g = [0.3, 0.7];
    let mut calls = 0;
    let mut hvp = |v: &[f64]| {
        calls += 1;
        Ok(vec![v[0], -v[1]])
    };
    let step = truncated_cg(&mut hvp, &g, 0.5, 10).unwrap();
    assert!(step.negative_curvature);
    assert!(dot(&g, &step.direction) < 0.0);

    // curvature along the first direction is negative: fall back to −g
    let g = [0.1, 2.0];
    let step = truncated_cg(&mut hvp, &g, 0.5, 10).unwrap();
    assert!(step.negative_curvature);
    assert_eq!(step.direction, [-0.1, -2.0]);
}

#[test]
fn cg_finite_termination_on_quadratic() {
    let scale = [1.0, 2.0, 5.0, 10.0, 0.5];
    let g = [1.0, -1.0, 2.0, 0.5, -3.0];
    let mut hvp = |v: &[f64]| Ok(v.iter().zip(&scale).map(|(a, s)| a * s).collect());
    let step = truncated_cg(&mut hvp, &g, 1e-14, 100).unwrap();
    assert!(step.hvp_calls <= 5);
    for i in 0..5 {
        assert!((step.direction[i] + g[i] / scale[i]).abs() < 1e-10);
    }
}

#[test]
fn runs_are_deterministic() {
    let a = minimize_lbfgs(&Rosenbrock, &[-1.2, 1.0], &tight(), &NullClock).unwrap();
    let b = minimize_lbfgs(&Rosenbrock, &[-1.2, 1.0], &tight(), &NullClock).unwrap();
    assert_eq!(a, b);
    let a = minimize_newton_cg(&Rosenbrock, &[-1.2, 1.0], &tight(), &NullClock).unwrap();
    let b = minimize_newton_cg(&Rosenbrock, &[-1.2, 1.0], &tight(), &NullClock).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_settings_and_dimension() {
    let bad = OptimizeSettings {
        c1: 0.9,
        c2: 0.1,
        ..OptimizeSettings::default()
    };
    assert!(matches!(
        minimize_lbfgs(&Rosenbrock, &[0.0, 0.0], &bad, &NullClock),
        Err(OptimizeError::InvalidSettings(_))
    ));
    let bad = OptimizeSettings {
        lbfgs_memory: 0,
        ..OptimizeSettings::default()
    };
    assert!(bad.validate().is_err());
    assert!(matches!(
        minimize_newton_cg(&Rosenbrock, &[0.0], &OptimizeSettings::default(), &NullClock),
        Err(OptimizeError::Dimension { expected: 2, got: 1 })
    ));
}

#[test]
fn missing_hvp_is_a_terminal_status() {
    struct NoHessian;
    impl ReducedObjective for NoHessian {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
            Ok(x[0] * x[0])
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
            Ok(vec![2.0 * x[0]])
        }
    }
    let r = minimize_newton_cg(&NoHessian, &[1.0], &tight(), &NullClock).unwrap();
    assert_eq!(r.status, Status::EvaluationFailed);
    assert!(r.message.is_some());
    assert_eq!(r.records.len(), 1);
}

#[test]
fn max_iterations_status() {
    let settings = OptimizeSettings {
        max_iter: 2,
        grad_tol: 0.0,
        ..OptimizeSettings::default()
    };
    let r = minimize_lbfgs(&Rosenbrock, &[-1.2, 1.0], &settings, &NullClock).unwrap();
    assert_eq!(r.status, Status::MaxIterations);
    assert_eq!(r.records.len(), 3);
}

#[test]
fn wolfe_conditions_hold() {
    let x = [-1.2, 1.0];
    let (f0, g0) = Rosenbrock.value_and_gradient(&x).unwrap();
    let d: Vec<f64> = g0.iter().map(|v| -v).collect();
    let p = strong_wolfe(&Rosenbrock, &x, f0, &g0, &d, 1.0, 1e-4, 0.9, 40).unwrap();
    let dphi0 = dot(&g0, &d);
    assert!(p.f <= f0 + 1e-4 * p.alpha * dphi0);
    assert!(dot(&p.g, &d).abs() <= 0.9 * dphi0.abs());
    assert!(strong_wolfe(&Rosenbrock, &x, f0, &g0, &g0, 1.0, 1e-4, 0.9, 40).is_err());
}

proptest! {
    #[test]
    fn lbfgs_solves_diagonal_quadratics(
        scale in prop::collection::vec(0.1f64..10.0, 2..8),
        seed in prop::collection::vec(-5.0f64..5.0, 8),
    ) {
        let n = scale.len();
        let q = Quadratic { scale, hvps: Cell::new(0) };
        let r = minimize_lbfgs(&q, &seed[..n], &tight(), &NullClock).unwrap();
        prop_assert_eq!(r.status, Status::Converged);
        assert_descent(&r.records);
        let r = minimize_newton_cg(&q, &seed[..n], &tight(), &NullClock).unwrap();
        prop_assert_eq!(r.status, Status::Converged);
    }
}
