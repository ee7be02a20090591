use hessfem_core::ad::*;
use hessfem_core::math;
use proptest::prelude::*;

struct Square;
impl Kernel for Square {
    fn arity_in(&self) -> usize {
        1
    }
    fn arity_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        out[0] = x[0] * x[0];
    }
}

struct Cube;
impl Kernel for Cube {
    fn arity_in(&self) -> usize {
        1
    }
    fn arity_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        out[0] = x[0] * x[0] * x[0];
    }
}

/// `exp(θ·u)·u` with inputs `[θ, u]`.
struct ExpFlux;
impl Kernel for ExpFlux {
    fn arity_in(&self) -> usize {
        2
    }
    fn arity_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        out[0] = (x[0] * x[1]).exp() * x[1];
    }
}

struct Identity3;
impl Kernel for Identity3 {
    fn arity_in(&self) -> usize {
        3
    }
    fn arity_out(&self) -> usize {
        3
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        out.copy_from_slice(x);
    }
}

struct Sum2;
impl Kernel for Sum2 {
    fn arity_in(&self) -> usize {
        2
    }
    fn arity_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        out[0] = x[0] + x[1];
    }
}

struct ExpBilinear;
impl Kernel for ExpBilinear {
    fn arity_in(&self) -> usize {
        2
    }
    fn arity_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        out[0] = (x[0] * x[1]).exp();
    }
}

struct Log;
impl Kernel for Log {
    fn arity_in(&self) -> usize {
        1
    }
    fn arity_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        out[0] = x[0].ln();
    }
}

/// Sum of quartic monomials `c_k · x_a x_b x_c x_d`, plus a couple of
/// transcendental terms so every op participates.
#[derive(Debug, Clone)]
struct Quartic {
    n: usize,
    terms: Vec<(f64, [usize; 4])>,
}

impl Kernel for Quartic {
    fn arity_in(&self) -> usize {
        self.n
    }
    fn arity_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        let mut acc = S::from_f64(0.0);
        for (c, idx) in &self.terms {
            acc = acc + S::from_f64(*c) * x[idx[0]] * x[idx[1]] * x[idx[2]] * x[idx[3]];
        }
        out[0] = acc;
    }
}

/// Vector-valued kernel exercising the full operation set.
struct Mixed;
impl Kernel for Mixed {
    fn arity_in(&self) -> usize {
        3
    }
    fn arity_out(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        let two = S::from_f64(2.0);
        out[0] = (x[0] * x[1]).exp() + x[2].sin() * x[0] - x[1] / (two + x[2].cos());
        out[1] = S::dot(&x[..2], &x[1..]) + (x[0] * x[0] + two).ln() * x[2].powf(3.0);
    }
}

fn quartic_strategy() -> impl Strategy<Value = (Quartic, Vec<f64>)> {
    (2usize..5).prop_flat_map(|n| {
        let term = (-2.0..2.0f64, prop::array::uniform4(0..n));
        (
            prop::collection::vec(term, 1..6),
            prop::collection::vec(-1.5..1.5f64, n),
        )
            .prop_map(move |(terms, x)| (Quartic { n, terms }, x))
    })
}

fn central_fd_gradient<K: Kernel>(f: &K, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (eval(f, &xp).unwrap()[0] - eval(f, &xm).unwrap()[0]) / (2.0 * h)
        })
        .collect()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn jvp_examples() {
    assert_eq!(jvp(&Square, &[3.0], &[1.0]).unwrap(), [6.0]);
    let e = math::exp(1.0);
    let d = jvp(&ExpFlux, &[1.0, 1.0], &[0.0, 1.0]).unwrap();
    assert!((d[0] - 2.0 * e).abs() < 1e-14);
    assert_eq!(
        jvp(&Identity3, &[0.1, -4.0, 9.0], &[1.0, 2.0, 3.0]).unwrap(),
        [1.0, 2.0, 3.0]
    );
}

#[test]
fn vjp_examples() {
    assert_eq!(vjp(&Sum2, &[5.0, 7.0], &[1.0]).unwrap(), [1.0, 1.0]);
    assert_eq!(vjp(&Square, &[3.0], &[2.0]).unwrap(), [12.0]);
}

#[test]
fn domain_errors() {
    assert_eq!(jvp(&Log, &[-1.0], &[1.0]), Err(AdError::Domain));
    assert_eq!(vjp(&Log, &[0.0], &[1.0]), Err(AdError::Domain));
    assert_eq!(
        second_order(&Log, &[-2.0], CompositionMode::RevOverRev, &[1.0], &[1.0]),
        Err(AdError::Domain)
    );
}

#[test]
fn dimension_errors() {
    assert!(matches!(
        jvp(&Sum2, &[1.0], &[1.0]),
        Err(AdError::Dimension { .. })
    ));
    assert!(matches!(
        vjp(&Sum2, &[1.0, 2.0], &[1.0, 1.0]),
        Err(AdError::Dimension { .. })
    ));
}

#[test]
fn mode_parsing() {
    for m in CompositionMode::ALL {
        assert_eq!(m.as_str().parse::<CompositionMode>().unwrap(), m);
    }
    assert_eq!(CompositionMode::default(), CompositionMode::RevOverFwd);
    assert!(matches!(
        "fwd-over-fwd".parse::<CompositionMode>(),
        Err(AdError::UnsupportedMode(_))
    ));
}

#[test]
fn second_order_examples() {
    for mode in CompositionMode::ALL {
        assert_eq!(
            compose_second_order(&Cube, &[2.0], mode, &[1.0], &[1.0]).unwrap(),
            [12.0]
        );
        let r = compose_second_order(&ExpBilinear, &[0.0, 0.0], mode, &[1.0, 0.0], &[0.0, 1.0])
            .unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-15, "{mode}: {r:?}");
    }
}

#[test]
fn vector_second_order_matches_fd_of_vjp() {
    let x = [0.3, -0.7, 1.1];
    let w = [0.8, -1.3];
    let v = [0.2, 0.5, -0.9];
    let h = 1e-5;
    let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
    let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
    let gp = vjp(&Mixed, &xp, &w).unwrap();
    let gm = vjp(&Mixed, &xm, &w).unwrap();
    let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    for mode in CompositionMode::ALL {
        let so = second_order(&Mixed, &x, mode, &w, &v).unwrap();
        for (a, b) in so.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8, "{mode}: {so:?} vs {fd:?}");
        }
    }
}

#[test]
fn fd_consistency_is_second_order_in_h() {
    let f = Quartic {
        n: 3,
        terms: vec![
            (1.3, [0, 0, 1, 2]),
            (-0.7, [1, 1, 1, 2]),
            (0.4, [0, 1, 2, 2]),
        ],
    };
    let x = [0.9, -0.4, 1.2];
    let a = [0.3, 1.0, -0.5];
    let b = [-0.8, 0.2, 0.6];
    let exact = compose_second_order(&f, &x, CompositionMode::RevOverFwd, &a, &b).unwrap()[0];
    let err = |h: f64| {
        let xp: Vec<f64> = x.iter().zip(&b).map(|(p, d)| p + h * d).collect();
        let xm: Vec<f64> = x.iter().zip(&b).map(|(p, d)| p - h * d).collect();
        let gp = vjp(&f, &xp, &[1.0]).unwrap();
        let gm = vjp(&f, &xm, &[1.0]).unwrap();
        let fd: f64 = (0..3).map(|i| (gp[i] - gm[i]) / (2.0 * h) * a[i]).sum();
        (fd - exact).abs()
    };
    let (e2, e3) = (err(1e-2), err(1e-3));
    // O(h²): a decade in h buys two decades in error.
    let order = math::log10(e2 / e3);
    assert!((order - 2.0).abs() < 0.1, "observed order {order}");
}

proptest! {
    #[test]
    fn vjp_matches_central_differences((f, x) in quartic_strategy()) {
        let g = vjp(&f, &x, &[1.0]).unwrap();
        let fd = central_fd_gradient(&f, &x, 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            prop_assert!(rel_close(*a, *b, 1e-6), "{a} vs {b}");
        }
    }

    #[test]
    fn modes_agree((f, x) in quartic_strategy(), seed in any::<u64>()) {
        let n = x.len();
        let dir: Vec<f64> = (0..n).map(|i| (((seed >> (i * 8)) & 0xff) as f64) / 64.0 - 2.0).collect();
        let reference = second_order(&f, &x, CompositionMode::RevOverRev, &[1.0], &dir).unwrap();
        let scale = math::norm2(&reference).max(1e-300);
        for mode in [CompositionMode::FwdOverRev, CompositionMode::RevOverFwd] {
            let other = second_order(&f, &x, mode, &[1.0], &dir).unwrap();
            let diff: Vec<f64> = other.iter().zip(&reference).map(|(a, b)| a - b).collect();
            prop_assert!(math::norm2(&diff) <= 1e-12 * scale);
        }
    }

    #[test]
    fn hessian_symmetry((f, x) in quartic_strategy(), a in prop::collection::vec(-1.0..1.0f64, 4), b in prop::collection::vec(-1.0..1.0f64, 4)) {
        let n = x.len();
        for mode in CompositionMode::ALL {
            let ab = compose_second_order(&f, &x, mode, &a[..n], &b[..n]).unwrap()[0];
            let ba = compose_second_order(&f, &x, mode, &b[..n], &a[..n]).unwrap()[0];
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        }
    }

    #[test]
    fn jvp_vjp_linear_and_transposed(
        x in prop::collection::vec(-1.0..1.0f64, 3),
        v in prop::collection::vec(-2.0..2.0f64, 3),
        w in prop::collection::vec(-2.0..2.0f64, 3),
        u in prop::collection::vec(-2.0..2.0f64, 2),
        s in -3.0..3.0f64,
    ) {
        let jv = jvp(&Mixed, &x, &v).unwrap();
        let jw = jvp(&Mixed, &x, &w).unwrap();
        let vw: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
        let sv: Vec<f64> = v.iter().map(|a| s * a).collect();
        let j_sum = jvp(&Mixed, &x, &vw).unwrap();
        let j_scaled = jvp(&Mixed, &x, &sv).unwrap();
        for i in 0..2 {
            prop_assert!(rel_close(j_sum[i], jv[i] + jw[i], 1e-12));
            prop_assert!(rel_close(j_scaled[i], s * jv[i], 1e-12));
        }
        let ut_jv = math::dot(&u, &jv);
        let vjp_u = vjp(&Mixed, &x, &u).unwrap();
        prop_assert!(rel_close(ut_jv, math::dot(&vjp_u, &v), 1e-12));
        let u2: Vec<f64> = u.iter().map(|a| s * a).collect();
        let vjp_u2 = vjp(&Mixed, &x, &u2).unwrap();
        for i in 0..3 {
            prop_assert!(rel_close(vjp_u2[i], s * vjp_u[i], 1e-12));
        }
    }
}
