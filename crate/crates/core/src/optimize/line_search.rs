use alloc::vec::Vec;
use core::cell::Cell;

use super::ReducedObjective;
use crate::math::{abs, dot};

/// Accepted point of a line search.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchPoint {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub evaluations: usize,
}

struct Probe {
    alpha: f64,
    f: f64,
    dphi: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Strong-Wolfe line search along descent direction `d` from `(x, f0, g0)`.
///
/// Bracketing phase expands the step by 4× until the minimum is bracketed,
/// then the bracket is shrunk with safeguarded quadratic interpolation.
/// Failed evaluations count as `+∞`. When no step satisfies both conditions
/// within `max_evals` evaluations the error carries the best point found
/// that still satisfies sufficient decrease, if any.
#[allow(clippy::too_many_arguments)]
pub fn strong_wolfe(
    obj: &dyn ReducedObjective,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    alpha_init: f64,
    c1: f64,
    c2: f64,
    max_evals: usize,
) -> Result<LineSearchPoint, Option<LineSearchPoint>> {
    let dphi0 = dot(g0, d);
    if dphi0.is_nan() || dphi0 >= 0.0 {
        return Err(None);
    }
    let evals = Cell::new(0);
    let probe = |alpha: f64| -> Probe {
        evals.set(evals.get() + 1);
        let xt: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        match obj.value_and_gradient(&xt) {
            Ok((f, g)) if f.is_finite() => Probe {
                alpha,
                f,
                dphi: dot(&g, d),
                x: xt,
                g,
            },
            _ => Probe {
                alpha,
                f: f64::INFINITY,
                dphi: f64::NAN,
                x: xt,
                g: Vec::new(),
            },
        }
    };
    let armijo = |p: &Probe| p.f <= f0 + c1 * p.alpha * dphi0;
    let curvature = |p: &Probe| abs(p.dphi) <= -c2 * dphi0;

    let mut lo = Probe {
        alpha: 0.0,
        f: f0,
        dphi: dphi0,
        x: x.to_vec(),
        g: g0.to_vec(),
    };
    let mut alpha = alpha_init;
    let mut hi;
    let mut first = true;
    loop {
        if evals.get() >= max_evals {
            return Err(best(lo, evals.get()));
        }
        let p = probe(alpha);
        if !armijo(&p) || (!first && p.f >= lo.f) {
            hi = p;
            break;
        }
        if curvature(&p) {
            return Ok(finish(p, evals.get()));
        }
        if p.dphi >= 0.0 {
            hi = core::mem::replace(&mut lo, p);
            break;
        }
        alpha = 4.0 * p.alpha;
        lo = p;
        first = false;
    }

    // zoom: lo satisfies Armijo with the lowest f so far, hi brackets
    while evals.get() < max_evals {
        let delta = hi.alpha - lo.alpha;
        let mut a = f64::NAN;
        if hi.f.is_finite() {
            let denom = 2.0 * (hi.f - lo.f - lo.dphi * delta);
            if denom > 0.0 {
                a = lo.alpha - lo.dphi * delta * delta / denom;
            }
        }
        let (left, right) = if delta > 0.0 {
            (lo.alpha + 0.1 * delta, hi.alpha - 0.1 * delta)
        } else {
            (hi.alpha - 0.1 * delta, lo.alpha + 0.1 * delta)
        };
        if !(a >= left && a <= right) {
            a = lo.alpha + 0.5 * delta;
        }
        let p = probe(a);
        if !armijo(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(finish(p, evals.get()));
            }
            if p.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = core::mem::replace(&mut lo, p);
            } else {
                lo = p;
            }
        }
        if abs(hi.alpha - lo.alpha) <= 1e-16 * abs(lo.alpha).max(1e-300) {
            break;
        }
    }
    Err(best(lo, evals.get()))
}

fn best(lo: Probe, evaluations: usize) -> Option<LineSearchPoint> {
    (lo.alpha > 0.0).then(|| finish(lo, evaluations))
}

fn finish(p: Probe, evaluations: usize) -> LineSearchPoint {
    LineSearchPoint {
        alpha: p.alpha,
        x: p.x,
        f: p.f,
        g: p.g,
        evaluations,
    }
}
