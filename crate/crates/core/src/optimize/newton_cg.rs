use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    start, strong_wolfe, Clock, IterationRecord, OptimizeError, OptimizeResult, OptimizeSettings,
    ReducedObjective, Status,
};
use crate::math::{axpy, dot, norm2, norm_inf, sqrt};

/// Inner CG outcome.
pub struct CgStep {
    pub direction: Vec<f64>,
    pub hvp_calls: usize,
    pub negative_curvature: bool,
}

/// Truncated CG on `H d = −g`. Stops at the forcing tolerance
/// `min(forcing, √‖g‖)·‖g‖`, after `max_iter` products, or on non-positive
/// curvature (keeping the current iterate, or `−g` if there is none yet).
pub fn truncated_cg(
    hvp: &mut impl FnMut(&[f64]) -> Result<Vec<f64>, super::EvalError>,
    g: &[f64],
    forcing: f64,
    max_iter: usize,
) -> Result<CgStep, super::EvalError> {
    let gnorm = norm2(g);
    let tol = forcing.min(sqrt(gnorm)) * gnorm;
    let mut d = vec![0.0; g.len()];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut calls = 0;
    let mut negative_curvature = false;
    for j in 0..max_iter {
        let hp = hvp(&p)?;
        calls += 1;
        let curvature = dot(&p, &hp);
        if curvature <= 0.0 {
            negative_curvature = true;
            if j == 0 {
                d = g.iter().map(|v| -v).collect();
            }
            break;
        }
        let a = rr / curvature;
        axpy(a, &p, &mut d);
        axpy(-a, &hp, &mut r);
        let rr_new = dot(&r, &r);
        if sqrt(rr_new) <= tol {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Ok(CgStep {
        direction: d,
        hvp_calls: calls,
        negative_curvature,
    })
}

/// Truncated Newton-CG with a strong-Wolfe line search on the unit step.
pub fn minimize_newton_cg(
    obj: &dyn ReducedObjective,
    x0: &[f64],
    settings: &OptimizeSettings,
    clock: &dyn Clock,
) -> Result<OptimizeResult, OptimizeError> {
    let (mut f, mut g) = start(obj, x0, settings)?;
    let mut x = x0.to_vec();
    let mut records = vec![IterationRecord {
        iter: 0,
        elapsed_s: clock.elapsed_s(),
        objective: f,
        grad_norm: norm_inf(&g),
        n_hvp_calls: 0,
    }];
    let mut status = Status::MaxIterations;
    let mut message = None;

    for iter in 1..=settings.max_iter + 1 {
        if norm_inf(&g) <= settings.grad_tol {
            status = Status::Converged;
            break;
        }
        if iter > settings.max_iter {
            break;
        }
        let cg = {
            let xk = &x;
            let mut hvp = |v: &[f64]| obj.hvp(xk, v);
            truncated_cg(&mut hvp, &g, settings.cg_forcing, settings.cg_max_iter)
        };
        let cg = match cg {
            Ok(c) => c,
            Err(e) => {
                status = Status::EvaluationFailed;
                message = Some(format!("Hessian-vector product failed: {e}"));
                break;
            }
        };
        let mut d = cg.direction;
        let slope = dot(&d, &g);
        if slope.is_nan() || slope >= 0.0 {
            d = g.iter().map(|v| -v).collect();
        }
        let step = match strong_wolfe(
            obj,
            &x,
            f,
            &g,
            &d,
            1.0,
            settings.c1,
            settings.c2,
            settings.max_line_search,
        ) {
            Ok(p) => p,
            Err(best) => {
                if let Some(p) = best {
                    x = p.x;
                    f = p.f;
                    g = p.g;
                    records.push(IterationRecord {
                        iter,
                        elapsed_s: clock.elapsed_s(),
                        objective: f,
                        grad_norm: norm_inf(&g),
                        n_hvp_calls: cg.hvp_calls,
                    });
                }
                status = Status::LineSearchFailed;
                break;
            }
        };
        x = step.x;
        f = step.f;
        g = step.g;
        records.push(IterationRecord {
            iter,
            elapsed_s: clock.elapsed_s(),
            objective: f,
            grad_norm: norm_inf(&g),
            n_hvp_calls: cg.hvp_calls,
        });
    }

    Ok(OptimizeResult {
        grad_norm: norm_inf(&g),
        x,
        objective: f,
        status,
        message,
        records,
    })
}
