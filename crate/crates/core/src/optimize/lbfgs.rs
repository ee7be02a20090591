use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{
    start, strong_wolfe, Clock, IterationRecord, OptimizeError, OptimizeResult, OptimizeSettings,
    ReducedObjective, Status,
};
use crate::math::{dot, norm2, norm_inf};

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// Curvature pairs with `sᵀy ≤ 0` are dropped. The first step is scaled to
/// unit length; afterwards the initial inverse Hessian is `(sᵀy / yᵀy) I`.
pub fn minimize_lbfgs(
    obj: &dyn ReducedObjective,
    x0: &[f64],
    settings: &OptimizeSettings,
    clock: &dyn Clock,
) -> Result<OptimizeResult, OptimizeError> {
    let (mut f, mut g) = start(obj, x0, settings)?;
    let mut x = x0.to_vec();
    let mut records = alloc::vec![IterationRecord {
        iter: 0,
        elapsed_s: clock.elapsed_s(),
        objective: f,
        grad_norm: norm_inf(&g),
        n_hvp_calls: 0,
    }];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut status = Status::MaxIterations;

    for iter in 1..=settings.max_iter + 1 {
        if norm_inf(&g) <= settings.grad_tol {
            status = Status::Converged;
            break;
        }
        if iter > settings.max_iter {
            break;
        }
        let mut d = two_loop(&pairs, &g);
        if dot(&d, &g) >= 0.0 {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if pairs.is_empty() { 1.0 / norm2(&d) } else { 1.0 };
        let step = match strong_wolfe(
            obj,
            &x,
            f,
            &g,
            &d,
            alpha0,
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
                        n_hvp_calls: 0,
                    });
                }
                status = Status::LineSearchFailed;
                break;
            }
        };
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            if pairs.len() == settings.lbfgs_memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = step.x;
        f = step.f;
        g = step.g;
        records.push(IterationRecord {
            iter,
            elapsed_s: clock.elapsed_s(),
            objective: f,
            grad_norm: norm_inf(&g),
            n_hvp_calls: 0,
        });
    }

    Ok(OptimizeResult {
        grad_norm: norm_inf(&g),
        x,
        objective: f,
        status,
        message: None,
        records,
    })
}

/// `−H g` by the two-loop recursion.
fn two_loop(pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        crate::math::axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        crate::math::axpy(a - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
