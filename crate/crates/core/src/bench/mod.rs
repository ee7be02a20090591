//! Benchmark problems and the verification protocols run on them.
//!
//! Two benchmarks are defined on the unit square:
//!
//! * `model-nonlinear-id`: `∫ exp(θu) ∇u·∇v − ∫ b v − ∫_ΓN t v` with a
//!   Gaussian source `b`, traction `t = sin(5x₁)` on the top and bottom
//!   sides and `u = 0` on the left and right sides. The exponent field `θ`
//!   is the unknown; observations come from `θ ≡ 1`.
//! * `source-id`: linear Poisson `∫ ∇u·∇v − ∫ θ v` with the same boundary
//!   split and no traction. The source `θ = b` is the unknown; observations
//!   come from the Gaussian source.
//!
//! Both minimize `½∫(u − u_obs)² + α/2 ∫θ²`.

mod bakeoff;
mod verify;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use bakeoff::{relative_l2_error, run_optimizer, OptimizerKind, OptimizerRun};
pub use verify::{
    fit_slope, run_fd_comparison, run_mode_check, run_symmetry_check, run_taylor_test, FdRecord,
    FdReport, ModeReport, SymmetryReport, TaylorReport, TaylorSlopes, TAYLOR_FLOOR,
};

use crate::fem::{
    build_unit_square_mesh, Discretization, FemError, L2Misfit, Mesh, NonlinearPoisson, Side,
    SourceField,
};
use crate::implicit::{FemSystem, ImplicitError, ImplicitProblem, PdeSystem, SolverSettings};
use crate::math::{exp, sin};

/// Default regularization weight.
pub const DEFAULT_ALPHA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkName {
    ModelNonlinearId,
    SourceId,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 2] = [BenchmarkName::ModelNonlinearId, BenchmarkName::SourceId];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::ModelNonlinearId => "model-nonlinear-id",
            BenchmarkName::SourceId => "source-id",
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| BenchError::UnknownBenchmark(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}` (expected model-nonlinear-id or source-id)")]
    UnknownBenchmark(String),
    #[error("unknown optimizer `{0}` (expected lbfgs, newton-cg-ad or newton-cg-fd)")]
    UnknownOptimizer(String),
    #[error("invalid input: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Implicit(#[from] ImplicitError),
    #[error(transparent)]
    Eval(#[from] crate::optimize::EvalError),
    #[error(transparent)]
    Optimize(#[from] crate::optimize::OptimizeError),
}

/// Everything needed to rebuild a benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub name: BenchmarkName,
    pub nx: usize,
    pub ny: usize,
    pub alpha: f64,
    /// Parameters the observation was generated from.
    pub reference: Vec<f64>,
    /// Nodal observation `y_obs`.
    pub observed: Vec<f64>,
}

/// Reduced problem type shared by all benchmarks.
pub type Benchmark = ImplicitProblem<Box<dyn PdeSystem>>;

/// `10 exp(−|x − (½, ½)|² / 0.02)`.
pub fn gaussian_source(x: [f64; 2]) -> f64 {
    let (a, b) = (x[0] - 0.5, x[1] - 0.5);
    10.0 * exp(-(a * a + b * b) / 0.02)
}

/// `sin(5x₁)`.
pub fn model_traction(x: [f64; 2]) -> f64 {
    sin(5.0 * x[0])
}

/// Unit-square mesh shared by the benchmarks: Dirichlet on the left and
/// right sides, Neumann on the bottom and top.
pub fn benchmark_mesh(nx: usize, ny: usize) -> Result<Mesh, FemError> {
    build_unit_square_mesh(nx, ny, &[Side::Left, Side::Right], &[Side::Bottom, Side::Top])
}

fn model_discretization(nx: usize, ny: usize) -> Result<Discretization, FemError> {
    Discretization::new(benchmark_mesh(nx, ny)?)
}

fn with_observation<S: PdeSystem + 'static>(
    system: S,
    reference: &[f64],
    set: impl FnOnce(&mut S, Vec<f64>),
) -> Result<(Box<dyn PdeSystem>, Vec<f64>), ImplicitError> {
    let mut p = ImplicitProblem::new(system, SolverSettings::default());
    let y_obs = p.solve_forward(reference)?;
    set(p.system_mut(), y_obs.clone());
    let system = p.into_system();
    Ok((Box::new(system), y_obs))
}

/// Builds a benchmark, generating its observation with a forward solve at
/// the reference parameters.
pub fn make_benchmark(
    name: BenchmarkName,
    nx: usize,
    ny: usize,
    alpha: f64,
) -> Result<(Benchmark, BenchmarkSpec), BenchError> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(BenchError::Invalid("alpha must be finite and non-negative"));
    }
    let disc = model_discretization(nx, ny)?;
    let density = L2Misfit { alpha };
    let (system, reference, observed) = match name {
        BenchmarkName::ModelNonlinearId => {
            let data = disc.interpolate_to_quad(gaussian_source);
            let reference = alloc::vec![1.0; disc.n_params()];
            let form = NonlinearPoisson {
                traction: Some(model_traction),
            };
            let (s, y) = with_observation(FemSystem::new(disc, form, density, data), &reference, |s, y| {
                s.observed = y
            })?;
            (s, reference, y)
        }
        BenchmarkName::SourceId => {
            let reference = disc.interpolate_to_quad(gaussian_source);
            let (s, y) =
                with_observation(FemSystem::new(disc, SourceField, density, Vec::new()), &reference, |s, y| {
                    s.observed = y
                })?;
            (s, reference, y)
        }
    };
    let spec = BenchmarkSpec {
        name,
        nx,
        ny,
        alpha,
        reference,
        observed,
    };
    Ok((ImplicitProblem::new(system, SolverSettings::default()), spec))
}

/// Quadrature point coordinates of a benchmark mesh, in parameter order.
pub fn quad_coords(spec: &BenchmarkSpec) -> Result<Vec<[f64; 2]>, BenchError> {
    Ok(model_discretization(spec.nx, spec.ny)?.quad_coords())
}

/// Random generator for stream `stream` of `seed`. Streams are independent,
/// so samples can be drawn in any order.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` independent standard normal draws.
pub fn standard_normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Starting point of the inverse runs: zero for `source-id`,
/// `1 + 0.1·noise` for `model-nonlinear-id`.
pub fn initial_guess(name: BenchmarkName, m: usize, seed: u64) -> Vec<f64> {
    match name {
        BenchmarkName::SourceId => alloc::vec![0.0; m],
        BenchmarkName::ModelNonlinearId => standard_normal(&mut sample_rng(seed, u64::MAX), m)
            .into_iter()
            .map(|v| 1.0 + 0.1 * v)
            .collect(),
    }
}
