//! Nested automatic differentiation on small vector kernels.
//!
//! Kernels are written once, generically over [`Scalar`], and evaluated over
//! `f64`, [`Dual`] (forward), [`Var`] (reverse), or nested combinations of the
//! two for second order:
//!
//! | mode          | evaluation type            |
//! |---------------|----------------------------|
//! | fwd-over-rev  | `Var<Dual<f64>>`           |
//! | rev-over-fwd  | `Dual<Var<f64>>`           |
//! | rev-over-rev  | `Var<Var<f64>>`            |
//!
//! Each call builds its own [`Trace`]; nothing is shared between calls.

mod dual;
mod scalar;
mod trace;

pub use dual::Dual;
pub use scalar::Scalar;
pub use trace::{Node, Op, Trace, Var};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdError {
    #[error("kernel evaluated outside its domain (non-finite result)")]
    Domain,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unsupported composition mode `{0}`")]
    UnsupportedMode(alloc::string::String),
}

/// A map `R^arity_in -> R^arity_out` written over the closed operation set.
pub trait Kernel {
    fn arity_in(&self) -> usize;
    fn arity_out(&self) -> usize;
    /// Write `f(x)` into `out`; `out.len() == arity_out()`.
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]);
}

/// Nesting order used for second-order terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompositionMode {
    /// JVP of a VJP.
    FwdOverRev,
    /// VJP of a JVP.
    #[default]
    RevOverFwd,
    /// VJP of a VJP.
    RevOverRev,
}

impl CompositionMode {
    pub const ALL: [CompositionMode; 3] = [
        CompositionMode::FwdOverRev,
        CompositionMode::RevOverFwd,
        CompositionMode::RevOverRev,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CompositionMode::FwdOverRev => "fwd-over-rev",
            CompositionMode::RevOverFwd => "rev-over-fwd",
            CompositionMode::RevOverRev => "rev-over-rev",
        }
    }
}

impl fmt::Display for CompositionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CompositionMode {
    type Err = AdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fwd-over-rev" => Ok(CompositionMode::FwdOverRev),
            "rev-over-fwd" => Ok(CompositionMode::RevOverFwd),
            "rev-over-rev" => Ok(CompositionMode::RevOverRev),
            other => Err(AdError::UnsupportedMode(other.into())),
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), AdError> {
    if expected == got {
        Ok(())
    } else {
        Err(AdError::Dimension { expected, got })
    }
}

fn finite<S: Scalar>(values: &[S]) -> Result<(), AdError> {
    if values.iter().all(Scalar::all_finite) {
        Ok(())
    } else {
        Err(AdError::Domain)
    }
}

/// Plain evaluation.
pub fn eval<K: Kernel>(f: &K, x: &[f64]) -> Result<Vec<f64>, AdError> {
    check_len(f.arity_in(), x.len())?;
    let mut out = vec![0.0; f.arity_out()];
    f.eval(x, &mut out);
    finite(&out)?;
    Ok(out)
}

/// `(f(x), ∂f/∂x · v)` from one dual-number pass.
pub fn value_and_jvp<K: Kernel>(
    f: &K,
    x: &[f64],
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), AdError> {
    check_len(f.arity_in(), x.len())?;
    check_len(f.arity_in(), v.len())?;
    let xs: Vec<Dual<f64>> = x.iter().zip(v).map(|(&p, &t)| Dual::new(p, t)).collect();
    let mut out = vec![Dual::from_f64(0.0); f.arity_out()];
    f.eval(&xs, &mut out);
    finite(&out)?;
    Ok((
        out.iter().map(|d| d.primal).collect(),
        out.iter().map(|d| d.tangent).collect(),
    ))
}

/// Jacobian-vector product `∂f/∂x · v`.
pub fn jvp<K: Kernel>(f: &K, x: &[f64], v: &[f64]) -> Result<Vec<f64>, AdError> {
    value_and_jvp(f, x, v).map(|(_, t)| t)
}

/// Vector-Jacobian product `wᵀ · ∂f/∂x`, one recorded pass plus one reverse sweep.
pub fn vjp<K: Kernel>(f: &K, x: &[f64], w: &[f64]) -> Result<Vec<f64>, AdError> {
    check_len(f.arity_in(), x.len())?;
    check_len(f.arity_out(), w.len())?;
    let trace = Trace::<f64>::new();
    let xs = trace.inputs(x);
    let mut out = vec![Var::constant(0.0); f.arity_out()];
    f.eval(&xs, &mut out);
    finite(&out)?;
    let g = trace.pullback(&out, w);
    finite(&g)?;
    Ok(g)
}

/// `∂/∂x (wᵀ · ∂f/∂x · v)`: the gradient of the directional derivative
/// along `v`, weighted by the output cotangent `w`. Length `arity_in`.
///
/// All three modes compute the same quantity; they differ only in how the
/// two differentiations are nested.
pub fn second_order<K: Kernel>(
    f: &K,
    x: &[f64],
    mode: CompositionMode,
    w: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, AdError> {
    let n = f.arity_in();
    let m = f.arity_out();
    check_len(n, x.len())?;
    check_len(n, v.len())?;
    check_len(m, w.len())?;
    let result = match mode {
        CompositionMode::FwdOverRev => {
            let trace = Trace::<Dual<f64>>::new();
            let seeds: Vec<Dual<f64>> =
                x.iter().zip(v).map(|(&p, &t)| Dual::new(p, t)).collect();
            let xs = trace.inputs(&seeds);
            let mut out = vec![Var::constant(Dual::from_f64(0.0)); m];
            f.eval(&xs, &mut out);
            finite(&out)?;
            let cot: Vec<Dual<f64>> = w.iter().map(|&c| Dual::constant(c)).collect();
            trace
                .pullback(&out, &cot)
                .into_iter()
                .map(|g| g.tangent)
                .collect::<Vec<_>>()
        }
        CompositionMode::RevOverFwd => {
            let trace = Trace::<f64>::new();
            let xs: Vec<Dual<Var<'_, f64>>> = x
                .iter()
                .zip(v)
                .map(|(&p, &t)| Dual::new(trace.input(p), Var::constant(t)))
                .collect();
            let mut out = vec![Dual::from_f64(0.0); m];
            f.eval(&xs, &mut out);
            finite(&out)?;
            let tangents: Vec<Var<'_, f64>> = out.iter().map(|d| d.tangent).collect();
            trace.pullback(&tangents, w)
        }
        CompositionMode::RevOverRev => {
            let outer = Trace::<f64>::new();
            let outer_x = outer.inputs(x);
            let inner = Trace::<Var<'_, f64>>::new();
            let inner_x = inner.inputs(&outer_x);
            let mut out = vec![Var::constant(Var::constant(0.0)); m];
            f.eval(&inner_x, &mut out);
            finite(&out)?;
            let cot: Vec<Var<'_, f64>> = w.iter().map(|&c| Var::constant(c)).collect();
            let grad = inner.pullback(&out, &cot);
            let dir: Vec<Var<'_, f64>> = v.iter().map(|&c| Var::constant(c)).collect();
            let s = Scalar::dot(&grad, &dir);
            outer.pullback(&[s], &[1.0])
        }
    };
    finite(&result)?;
    Ok(result)
}

/// Second-order directional quantity in the requested nesting.
///
/// * Scalar-output kernel with `left.len() == arity_in`: returns the
///   one-element bilinear form `[leftᵀ · ∇²f · right]`.
/// * Otherwise `left` is an output cotangent (`len == arity_out`) and the
///   result is the vector `∂/∂x (leftᵀ · ∂f/∂x · right)`.
pub fn compose_second_order<K: Kernel>(
    f: &K,
    x: &[f64],
    mode: CompositionMode,
    left: &[f64],
    right: &[f64],
) -> Result<Vec<f64>, AdError> {
    if f.arity_out() == 1 && left.len() == f.arity_in() {
        let hv = second_order(f, x, mode, &[1.0], right)?;
        Ok(vec![crate::math::dot(left, &hv)])
    } else {
        second_order(f, x, mode, left, right)
    }
}

