use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{sample_rng, standard_normal, BenchError};
use crate::ad::CompositionMode;
use crate::implicit::{ImplicitProblem, PdeSystem};
use crate::math::{abs, dot, ln, norm2};
use crate::optimize::ReducedObjective;

/// Remainders below this are treated as exact zeros and left out of slope fits.
pub const TAYLOR_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorSlopes {
    pub zeroth: Option<f64>,
    pub first: Option<f64>,
    pub second: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub eps: Vec<f64>,
    pub r_zeroth: Vec<f64>,
    pub r_first: Vec<f64>,
    pub r_second: Vec<f64>,
    pub slopes: TaylorSlopes,
    /// Number of remainders under [`TAYLOR_FLOOR`] excluded from the fits.
    pub excluded: usize,
}

/// Least-squares slope of `log r` against `log ε`, skipping remainders below
/// [`TAYLOR_FLOOR`]. `None` if fewer than two points remain.
pub fn fit_slope(eps: &[f64], r: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(r)
        .filter(|(_, r)| **r >= TAYLOR_FLOOR)
        .map(|(e, r)| (ln(*e), ln(*r)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// Taylor remainders of the reduced objective along `direction`:
///
/// ```text
/// r_zeroth = |g(θ+εδ) − g(θ)|
/// r_first  = |g(θ+εδ) − g(θ) − ε ∇gᵀδ|
/// r_second = |g(θ+εδ) − g(θ) − ε ∇gᵀδ − ½ε² δᵀHδ|
/// ```
///
/// which shrink like `ε`, `ε²` and `ε³` when the gradient and the
/// Hessian-vector product are right.
pub fn run_taylor_test(
    obj: &dyn ReducedObjective,
    theta: &[f64],
    direction: &[f64],
    eps: &[f64],
) -> Result<TaylorReport, BenchError> {
    if eps.len() < 3 || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(BenchError::Invalid("need at least three positive step scales"));
    }
    let (lo, hi) = eps
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(*e), hi.max(*e)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(BenchError::Invalid("step scales must span at least two decades"));
    }
    if direction.len() != theta.len() {
        return Err(BenchError::Invalid("direction and parameter lengths differ"));
    }
    let g0 = obj.value(theta)?;
    let slope = dot(&obj.gradient(theta)?, direction);
    let curvature = dot(direction, &obj.hvp(theta, direction)?);
    let mut report = TaylorReport {
        eps: eps.to_vec(),
        r_zeroth: Vec::with_capacity(eps.len()),
        r_first: Vec::with_capacity(eps.len()),
        r_second: Vec::with_capacity(eps.len()),
        slopes: TaylorSlopes {
            zeroth: None,
            first: None,
            second: None,
        },
        excluded: 0,
    };
    for &e in eps {
        let shifted: Vec<f64> = theta.iter().zip(direction).map(|(t, d)| t + e * d).collect();
        let d0 = obj.value(&shifted)? - g0;
        let d1 = d0 - e * slope;
        let d2 = d1 - 0.5 * e * e * curvature;
        report.r_zeroth.push(abs(d0));
        report.r_first.push(abs(d1));
        report.r_second.push(abs(d2));
    }
    report.excluded = [&report.r_zeroth, &report.r_first, &report.r_second]
        .iter()
        .flat_map(|r| r.iter())
        .filter(|r| **r < TAYLOR_FLOOR)
        .count();
    report.slopes = TaylorSlopes {
        zeroth: fit_slope(eps, &report.r_zeroth),
        first: fit_slope(eps, &report.r_first),
        second: fit_slope(eps, &report.r_second),
    };
    Ok(report)
}

/// One finite-difference comparison sample. A metric is `None` when the
/// forward problem failed for that draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdRecord {
    pub h: f64,
    pub sample: usize,
    pub seed: u64,
    /// `‖v_AD − v_FD‖ / ‖v_AD‖` for a random `(θ, θ̂)`.
    pub e_v: Option<f64>,
    /// `|s_FD − s_AD| / |s_AD|` with `s = θ̃ᵀHθ̂` for a fresh random triple.
    pub e_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub records: Vec<FdRecord>,
    /// Records with at least one metric missing.
    pub skipped: usize,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

impl FdReport {
    pub fn e_v(&self, h: f64) -> Vec<f64> {
        self.records.iter().filter(|r| r.h == h).filter_map(|r| r.e_v).collect()
    }

    pub fn e_s(&self, h: f64) -> Vec<f64> {
        self.records.iter().filter(|r| r.h == h).filter_map(|r| r.e_s).collect()
    }

    pub fn max_e_v(&self, h: f64) -> Option<f64> {
        self.e_v(h).into_iter().reduce(f64::max)
    }

    pub fn max_e_s(&self, h: f64) -> Option<f64> {
        self.e_s(h).into_iter().reduce(f64::max)
    }

    pub fn median_e_v(&self, h: f64) -> Option<f64> {
        median(self.e_v(h))
    }
}

/// Compares `hvp` against `fd_hvp` with step `h` for every `h` and sample.
///
/// Each `(h, sample)` pair gets its own random stream; `(θ, θ̂)` for `e_v`
/// and `(θ, θ̂, θ̃)` for `e_s` are independent standard normal draws.
pub fn run_fd_comparison<S: PdeSystem>(
    p: &ImplicitProblem<S>,
    h_list: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<FdReport, BenchError> {
    if n_samples == 0 {
        return Err(BenchError::Invalid("need at least one sample"));
    }
    if h_list.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(BenchError::Invalid("step sizes must be positive"));
    }
    let m = p.n_params();
    let mut records = Vec::with_capacity(h_list.len() * n_samples);
    for (hi, &h) in h_list.iter().enumerate() {
        for sample in 0..n_samples {
            let mut rng = sample_rng(seed, (hi * n_samples + sample) as u64);
            let theta = standard_normal(&mut rng, m);
            let right = standard_normal(&mut rng, m);
            let e_v = (|| {
                let ad = p.hvp(&theta, &right)?;
                let fd = p.fd_hvp(&theta, &right, h)?;
                let diff: Vec<f64> = ad.iter().zip(&fd).map(|(a, b)| a - b).collect();
                Ok::<_, BenchError>(norm2(&diff) / norm2(&ad))
            })()
            .ok();
            let theta = standard_normal(&mut rng, m);
            let right = standard_normal(&mut rng, m);
            let left = standard_normal(&mut rng, m);
            let e_s = (|| {
                let s_ad = dot(&left, &p.hvp(&theta, &right)?);
                let s_fd = dot(&left, &p.fd_hvp(&theta, &right, h)?);
                Ok::<_, BenchError>(abs(s_fd - s_ad) / abs(s_ad))
            })()
            .ok();
            records.push(FdRecord {
                h,
                sample,
                seed,
                e_v,
                e_s,
            });
        }
    }
    let skipped = records
        .iter()
        .filter(|r| r.e_v.is_none() || r.e_s.is_none())
        .count();
    Ok(FdReport { records, skipped })
}

/// Largest pairwise relative difference between composition modes, per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub samples: Vec<f64>,
    pub max: f64,
}

const MODE_STREAMS: u64 = 1 << 40;
const SYMMETRY_STREAMS: u64 = 2 << 40;

/// Evaluates `hvp` in every [`CompositionMode`] at random `(θ, θ̂)` and
/// reports the largest pairwise `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn run_mode_check<S: PdeSystem>(
    p: &ImplicitProblem<S>,
    n_samples: usize,
    seed: u64,
) -> Result<ModeReport, BenchError> {
    let m = p.n_params();
    let mut samples = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let mut rng = sample_rng(seed, MODE_STREAMS + s as u64);
        let theta = standard_normal(&mut rng, m);
        let dir = standard_normal(&mut rng, m);
        let mut out = Vec::with_capacity(3);
        for mode in CompositionMode::ALL {
            out.push(p.hvp_in_mode(&theta, &dir, mode)?);
        }
        let mut worst: f64 = 0.0;
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                let d: Vec<f64> = out[i].iter().zip(&out[j]).map(|(a, b)| a - b).collect();
                worst = worst.max(norm2(&d) / norm2(&out[i]).max(norm2(&out[j])));
            }
        }
        samples.push(worst);
    }
    let max = samples.iter().copied().fold(0.0, f64::max);
    Ok(ModeReport { samples, max })
}

/// `|θ̃ᵀHθ̂ − θ̂ᵀHθ̃| / |θ̃ᵀHθ̂|` per random triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub samples: Vec<f64>,
    pub max: f64,
}

pub fn run_symmetry_check<S: PdeSystem>(
    p: &ImplicitProblem<S>,
    n_samples: usize,
    seed: u64,
) -> Result<SymmetryReport, BenchError> {
    let m = p.n_params();
    let mut samples = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let mut rng = sample_rng(seed, SYMMETRY_STREAMS + s as u64);
        let theta = standard_normal(&mut rng, m);
        let right = standard_normal(&mut rng, m);
        let left = standard_normal(&mut rng, m);
        let a = dot(&left, &p.hvp(&theta, &right)?);
        let b = dot(&right, &p.hvp(&theta, &left)?);
        samples.push(abs(a - b) / abs(a));
    }
    let max = samples.iter().copied().fold(0.0, f64::max);
    Ok(SymmetryReport { samples, max })
}
