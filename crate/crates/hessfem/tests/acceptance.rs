//! Acceptance criteria 1-8. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if a
//! criterion outside `KNOWN_RED` fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hessfem::cli::taylor_draw;
use hessfem_core::bench::{
    initial_guess, make_benchmark, run_fd_comparison, run_mode_check, run_optimizer,
    run_symmetry_check, run_taylor_test, sample_rng, standard_normal, BenchmarkName,
    OptimizerKind, DEFAULT_ALPHA,
};
use hessfem_core::fem::{build_unit_square_mesh, Discretization, L2Misfit, LinearPoisson, Side};
use hessfem_core::implicit::{FemSystem, ImplicitProblem, SolverSettings};
use hessfem_core::optimize::{NullClock, OptimizeSettings, Status};

const MESH: usize = 32;
const EPS: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

// criterion 1
const SLOPE_TOL: f64 = 0.1;
const TAYLOR_BUDGET: Duration = Duration::from_secs(30);
// criteria 2 and 3
const FD_SAMPLES: usize = 100;
const MAX_E_V: f64 = 2e-3;
const MAX_E_S: f64 = 4e-2;
const FD_BUDGET: Duration = Duration::from_secs(300);
// criteria 4 and 5
const MODE_SAMPLES: usize = 20;
const MODE_TOL: f64 = 1e-10;
const SYMMETRY_SAMPLES: usize = 50;
const SYMMETRY_TOL: f64 = 1e-10;
// criterion 6
const HESSIAN_FD_STEP: f64 = 1e-4;
const HESSIAN_TOL: f64 = 1e-4;
const GRADIENT_FD_STEP: f64 = 1e-6;
const GRADIENT_TOL: f64 = 1e-5;
// criterion 7
const REDUCTION: f64 = 1e-3;
const MAX_OUTER: usize = 100;
const BAKEOFF_GRAD_TOL: f64 = 1e-12;
// criterion 8
const PATCH_TOL: f64 = 1e-10;
const MAX_NEWTON_64: usize = 10;

/// Criteria expected to fail. Their FAIL line is still printed; only a
/// failure outside this list makes the target exit non-zero.
const KNOWN_RED: &[usize] = &[3];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict, String> {
    Ok(Verdict { pass, detail })
}

fn taylor_orders() -> Result<Verdict, String> {
    let start = Instant::now();
    let (p, _) = make_benchmark(BenchmarkName::ModelNonlinearId, MESH, MESH, DEFAULT_ALPHA)
        .map_err(|e| e.to_string())?;
    let (theta, dir) = taylor_draw(p.n_params(), 0);
    let r = run_taylor_test(&p, &theta, &dir, &EPS).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let s = [r.slopes.zeroth, r.slopes.first, r.slopes.second];
    let ok = s
        .iter()
        .zip([1.0, 2.0, 3.0])
        .all(|(v, order)| v.is_some_and(|v| (v - order).abs() <= SLOPE_TOL));
    verdict(
        ok && elapsed <= TAYLOR_BUDGET,
        format!("slopes {s:.3?} (want 1,2,3 ±{SLOPE_TOL}), {elapsed:.1?}"),
    )
}

/// Criteria 2 and 3 share one run of the FD protocol.
fn fd_protocol() -> Result<(Verdict, Verdict), String> {
    let start = Instant::now();
    let (p, _) = make_benchmark(BenchmarkName::ModelNonlinearId, MESH, MESH, DEFAULT_ALPHA)
        .map_err(|e| e.to_string())?;
    let h = [1e-1, 1e-2, 1e-3];
    let report = run_fd_comparison(&p, &h, FD_SAMPLES, 0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let complete = report.skipped == 0 && report.e_v(0.1).len() == FD_SAMPLES;
    let max_v = report.max_e_v(0.1).unwrap_or(f64::INFINITY);
    let medians: Vec<f64> = h
        .iter()
        .map(|&h| report.median_e_v(h).unwrap_or(f64::NAN))
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let v = Verdict {
        pass: complete && max_v <= MAX_E_V && decreasing && elapsed <= FD_BUDGET,
        detail: format!(
            "max e_v(h=0.1) = {:.4}% (limit {:.2}%), median e_v over h=1e-1,1e-2,1e-3 = [{}], skipped {}, {elapsed:.1?}",
            100.0 * max_v,
            100.0 * MAX_E_V,
            medians.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>().join(", "),
            report.skipped
        ),
    };
    let max_s = report.max_e_s(0.1).unwrap_or(f64::INFINITY);
    let s = Verdict {
        pass: report.e_s(0.1).len() == FD_SAMPLES && max_s <= MAX_E_S,
        detail: format!(
            "max e_s(h=0.1) = {:.4}% (limit {:.0}%), median {:.2e}",
            100.0 * max_s,
            100.0 * MAX_E_S,
            median(report.e_s(0.1))
        ),
    };
    Ok((v, s))
}

fn mode_agreement() -> Result<Verdict, String> {
    let (p, _) = make_benchmark(BenchmarkName::ModelNonlinearId, MESH, MESH, DEFAULT_ALPHA)
        .map_err(|e| e.to_string())?;
    let r = run_mode_check(&p, MODE_SAMPLES, 0).map_err(|e| e.to_string())?;
    verdict(
        r.samples.len() == MODE_SAMPLES && r.max <= MODE_TOL,
        format!("max pairwise relative difference {:.2e} over {MODE_SAMPLES} samples", r.max),
    )
}

fn hessian_symmetry() -> Result<Verdict, String> {
    let (p, _) = make_benchmark(BenchmarkName::ModelNonlinearId, MESH, MESH, DEFAULT_ALPHA)
        .map_err(|e| e.to_string())?;
    let r = run_symmetry_check(&p, SYMMETRY_SAMPLES, 0).map_err(|e| e.to_string())?;
    verdict(
        r.samples.len() == SYMMETRY_SAMPLES && r.max <= SYMMETRY_TOL,
        format!("max relative asymmetry {:.2e} over {SYMMETRY_SAMPLES} triples", r.max),
    )
}

fn oracle_equivalence() -> Result<Verdict, String> {
    let (p, _) = make_benchmark(BenchmarkName::ModelNonlinearId, 2, 2, DEFAULT_ALPHA)
        .map_err(|e| e.to_string())?;
    let m = p.n_params();
    let theta = standard_normal(&mut sample_rng(0, 0), m);
    let f = |t: &[f64]| p.objective(t).map_err(|e| e.to_string());

    let h = p.full_hessian(&theta).map_err(|e| e.to_string())?;
    let scale = h.max_abs();
    let mut worst_h: f64 = 0.0;
    let mut t = theta.clone();
    for i in 0..m {
        for j in 0..m {
            let mut corner = |si: f64, sj: f64| {
                t.copy_from_slice(&theta);
                t[i] += si * HESSIAN_FD_STEP;
                t[j] += sj * HESSIAN_FD_STEP;
                f(&t)
            };
            let fd = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                + corner(-1.0, -1.0)?)
                / (4.0 * HESSIAN_FD_STEP * HESSIAN_FD_STEP);
            worst_h = worst_h.max((fd - h.get(i, j)).abs() / scale);
        }
    }

    let g = p.gradient(&theta).map_err(|e| e.to_string())?;
    let mut worst_g: f64 = 0.0;
    for k in 0..m {
        t.copy_from_slice(&theta);
        t[k] += GRADIENT_FD_STEP;
        let fp = f(&t)?;
        t[k] -= 2.0 * GRADIENT_FD_STEP;
        let fm = f(&t)?;
        let fd = (fp - fm) / (2.0 * GRADIENT_FD_STEP);
        worst_g = worst_g.max((fd - g[k]).abs() / g[k].abs());
    }
    verdict(
        worst_h <= HESSIAN_TOL && worst_g <= GRADIENT_TOL,
        format!("Hessian vs nested FD {worst_h:.2e} (limit {HESSIAN_TOL:e}), gradient vs FD {worst_g:.2e} per component (limit {GRADIENT_TOL:e})"),
    )
}

fn optimizer_bakeoff() -> Result<Verdict, String> {
    let (p, spec) = make_benchmark(BenchmarkName::SourceId, MESH, MESH, DEFAULT_ALPHA)
        .map_err(|e| e.to_string())?;
    let theta0 = initial_guess(spec.name, p.n_params(), 0);
    let f0 = p.objective(&theta0).map_err(|e| e.to_string())?;
    let settings = OptimizeSettings {
        max_iter: MAX_OUTER,
        grad_tol: BAKEOFF_GRAD_TOL,
        ..OptimizeSettings::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in OptimizerKind::ALL {
        let start = Instant::now();
        let run = run_optimizer(&p, &spec, kind, &theta0, &settings, &NullClock)
            .map_err(|e| e.to_string())?;
        let ratio = run.result.objective / f0;
        let iterations = run.result.records.len() - 1;
        match kind {
            OptimizerKind::Lbfgs => pass &= ratio <= REDUCTION && iterations <= MAX_OUTER,
            OptimizerKind::NewtonCgAd => {
                pass &= ratio <= REDUCTION
                    && iterations <= MAX_OUTER
                    && run.result.status == Status::Converged
            }
            // only has to finish with a recorded status
            OptimizerKind::NewtonCgFd => {}
        }
        parts.push(format!(
            "{kind}: {:?} after {iterations} it, f/f0 = {ratio:.2e} ({:.1?})",
            run.result.status,
            start.elapsed()
        ));
    }
    verdict(pass, parts.join("; "))
}

fn forward_sanity() -> Result<Verdict, String> {
    let mut mesh = build_unit_square_mesh(5, 4, &Side::ALL, &[]).map_err(|e| e.to_string())?;
    mesh.set_dirichlet_values(|x| x[0]);
    let disc = Discretization::new(mesh).map_err(|e| e.to_string())?;
    let coords: Vec<f64> = disc.mesh.nodes.iter().map(|x| x[0]).collect();
    let m = disc.n_params();
    let patch = ImplicitProblem::new(
        FemSystem::new(disc, LinearPoisson::default(), L2Misfit { alpha: 0.0 }, vec![0.0; m]),
        SolverSettings::default(),
    );
    let y = patch.solve_forward(&vec![0.0; m]).map_err(|e| e.to_string())?;
    let patch_err = y.iter().zip(&coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let linear_steps = patch.last_forward_stats().map_or(usize::MAX, |s| s.iterations);

    let (p, _) = make_benchmark(BenchmarkName::ModelNonlinearId, 64, 64, DEFAULT_ALPHA)
        .map_err(|e| e.to_string())?;
    p.solve_forward(&vec![1.0; p.n_params()]).map_err(|e| e.to_string())?;
    let nonlinear_steps = p.last_forward_stats().map_or(usize::MAX, |s| s.iterations);
    verdict(
        patch_err <= PATCH_TOL && linear_steps == 1 && nonlinear_steps <= MAX_NEWTON_64,
        format!("patch error {patch_err:.1e}, linear Newton steps {linear_steps}, nonlinear 64x64 Newton steps {nonlinear_steps}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let mut report = |n: usize, name: &str, v: Result<Verdict, String>| {
        let (pass, detail) = match v {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed.push(n);
        }
        println!(
            "criterion {n} [{}] {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    };
    report(1, "Taylor orders", taylor_orders());
    match fd_protocol() {
        Ok((v, s)) => {
            report(2, "AD vs FD Hessian-vector product", Ok(v));
            report(3, "scalar FD metric", Ok(s));
        }
        Err(e) => {
            report(2, "AD vs FD Hessian-vector product", Err(e.clone()));
            report(3, "scalar FD metric", Err(e));
        }
    }
    report(4, "composition-mode agreement", mode_agreement());
    report(5, "Hessian symmetry", hessian_symmetry());
    report(6, "oracle equivalence", oracle_equivalence());
    report(7, "optimizer bake-off", optimizer_bakeoff());
    report(8, "forward solver sanity", forward_sanity());
    let unexpected: Vec<usize> = failed.iter().copied().filter(|n| !KNOWN_RED.contains(n)).collect();
    println!(
        "summary: {}/8 pass, failing {failed:?}, known red {KNOWN_RED:?}, unexpected {unexpected:?}",
        8 - failed.len()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
