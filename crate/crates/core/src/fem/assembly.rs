//! Element-local AD assembly.
//!
//! Every global derivative quantity is a scatter of the matching element-level
//! AD operation on an 8-input kernel `(y_e[0..4], theta_e[0..4])`. Dirichlet
//! rows of the residual are `y_i - u_D,i`, so element contributions to those
//! rows are dropped and the rows' own (linear, parameter-free) derivative is
//! added explicitly.

use alloc::vec;
use alloc::vec::Vec;

use super::quadrature::{gauss_line, shape_gradients, shape_values};
use super::{FemError, Mesh, QuadratureRule, QUAD_PER_ELEMENT};
use crate::ad::{self, CompositionMode, Kernel, Scalar};
use crate::sparse::CsrMatrix;

/// Precomputed data at one volume quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    /// Gauss weight times the Jacobian determinant.
    pub weight: f64,
    pub shape: [f64; 4],
    /// Physical-coordinate shape gradients.
    pub grad: [[f64; 2]; 4],
    pub coord: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub nodes: [usize; 4],
    pub points: [QuadPoint; 4],
}

#[derive(Debug, Clone, PartialEq)]
struct FacetGeometry {
    nodes: [usize; 2],
    /// (weight × half-length, shape values of the two edge nodes, coordinate)
    points: [(f64, [f64; 2], [f64; 2]); 2],
}

/// Field values seen by a weak-form integrand at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct PointState<S> {
    pub u: S,
    pub grad_u: [S; 2],
    pub theta: S,
    pub coord: [f64; 2],
    /// Input data (e.g. a fixed source term) at this point.
    pub data: f64,
}

/// Pointwise weak form: `r_i = ∫ flux·∇φ_i − ∫ source·φ_i − ∫_ΓN traction·φ_i`.
pub trait WeakForm {
    fn flux<S: Scalar>(&self, p: &PointState<S>) -> [S; 2];
    fn source<S: Scalar>(&self, p: &PointState<S>) -> S;
    fn traction(&self, _coord: [f64; 2]) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DensityPoint<S> {
    pub u: S,
    pub theta: S,
    /// Observation interpolated to this point.
    pub observed: f64,
    pub coord: [f64; 2],
}

/// Integrand of a scalar functional `∫ density(u, θ) dΩ`.
pub trait ObjectiveDensity {
    fn density<S: Scalar>(&self, p: &DensityPoint<S>) -> S;
}

#[inline]
fn interpolate<S: Scalar>(qp: &QuadPoint, ye: &[S]) -> (S, [S; 2]) {
    let mut u = S::from_f64(0.0);
    let mut gx = S::from_f64(0.0);
    let mut gy = S::from_f64(0.0);
    for ((n, g), &y) in qp.shape.iter().zip(&qp.grad).zip(ye) {
        u = u + S::from_f64(*n) * y;
        gx = gx + S::from_f64(g[0]) * y;
        gy = gy + S::from_f64(g[1]) * y;
    }
    (u, [gx, gy])
}

struct ElementResidual<'a, F> {
    geom: &'a ElementGeometry,
    form: &'a F,
    data: [f64; 4],
}

impl<F: WeakForm> Kernel for ElementResidual<'_, F> {
    fn arity_in(&self) -> usize {
        8
    }

    fn arity_out(&self) -> usize {
        4
    }

    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        let (ye, theta) = x.split_at(4);
        for o in out.iter_mut() {
            *o = S::from_f64(0.0);
        }
        for (q, qp) in self.geom.points.iter().enumerate() {
            let (u, grad_u) = interpolate(qp, ye);
            let p = PointState {
                u,
                grad_u,
                theta: theta[q],
                coord: qp.coord,
                data: self.data[q],
            };
            let flux = self.form.flux(&p);
            let source = self.form.source(&p);
            let w = S::from_f64(qp.weight);
            for (i, o) in out.iter_mut().enumerate() {
                let g = qp.grad[i];
                let integrand = flux[0] * S::from_f64(g[0]) + flux[1] * S::from_f64(g[1])
                    - source * S::from_f64(qp.shape[i]);
                *o = *o + w * integrand;
            }
        }
    }
}

struct ElementObjective<'a, D> {
    geom: &'a ElementGeometry,
    density: &'a D,
    observed: [f64; 4],
}

impl<D: ObjectiveDensity> Kernel for ElementObjective<'_, D> {
    fn arity_in(&self) -> usize {
        8
    }

    fn arity_out(&self) -> usize {
        1
    }

    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        let (ye, theta) = x.split_at(4);
        let mut acc = S::from_f64(0.0);
        for (q, qp) in self.geom.points.iter().enumerate() {
            let (u, _) = interpolate(qp, ye);
            let p = DensityPoint {
                u,
                theta: theta[q],
                observed: self.observed[q],
                coord: qp.coord,
            };
            acc = acc + S::from_f64(qp.weight) * self.density.density(&p);
        }
        out[0] = acc;
    }
}

/// A mesh together with its quadrature and cached element geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub mesh: Mesh,
    pub rule: QuadratureRule,
    elements: Vec<ElementGeometry>,
    facets: Vec<FacetGeometry>,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Result<Self, FemError> {
        let rule = QuadratureRule::gauss_2x2();
        let mut elements = Vec::with_capacity(mesh.n_elements());
        for (e, nodes) in mesh.elements.iter().enumerate() {
            let xs = nodes.map(|n| mesh.nodes[n]);
            let mut points = [QuadPoint {
                weight: 0.0,
                shape: [0.0; 4],
                grad: [[0.0; 2]; 4],
                coord: [0.0; 2],
            }; 4];
            for (qp, (xi, w)) in points.iter_mut().zip(rule.points.iter().zip(rule.weights)) {
                let shape = shape_values(*xi);
                let dref = shape_gradients(*xi);
                // J[a][b] = ∂x_a/∂ξ_b
                let mut jac = [[0.0; 2]; 2];
                let mut coord = [0.0; 2];
                for k in 0..4 {
                    for a in 0..2 {
                        coord[a] += shape[k] * xs[k][a];
                        for b in 0..2 {
                            jac[a][b] += xs[k][a] * dref[k][b];
                        }
                    }
                }
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                if det <= 0.0 {
                    return Err(FemError::InvertedElement(e));
                }
                let inv = [
                    [jac[1][1] / det, -jac[0][1] / det],
                    [-jac[1][0] / det, jac[0][0] / det],
                ];
                let mut grad = [[0.0; 2]; 4];
                for k in 0..4 {
                    // ∇_x φ = J⁻ᵀ ∇_ξ φ
                    grad[k][0] = inv[0][0] * dref[k][0] + inv[1][0] * dref[k][1];
                    grad[k][1] = inv[0][1] * dref[k][0] + inv[1][1] * dref[k][1];
                }
                *qp = QuadPoint {
                    weight: w * det,
                    shape,
                    grad,
                    coord,
                };
            }
            elements.push(ElementGeometry {
                nodes: *nodes,
                points,
            });
        }

        let (line_pts, line_w) = gauss_line();
        let facets = mesh
            .neumann_facets
            .iter()
            .map(|f| {
                let nodes = mesh.elements[f.element];
                let a = nodes[f.local_edge];
                let b = nodes[(f.local_edge + 1) % 4];
                let (xa, xb) = (mesh.nodes[a], mesh.nodes[b]);
                let (dx, dy) = (xb[0] - xa[0], xb[1] - xa[1]);
                let half = 0.5 * crate::math::sqrt(dx * dx + dy * dy);
                let point = |s: f64, w: f64| {
                    let (pa, pb) = (0.5 * (1.0 - s), 0.5 * (1.0 + s));
                    (
                        w * half,
                        [pa, pb],
                        [pa * xa[0] + pb * xb[0], pa * xa[1] + pb * xb[1]],
                    )
                };
                FacetGeometry {
                    nodes: [a, b],
                    points: [point(line_pts[0], line_w[0]), point(line_pts[1], line_w[1])],
                }
            })
            .collect();

        Ok(Discretization {
            mesh,
            rule,
            elements,
            facets,
        })
    }

    /// State length N.
    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// Volumetric parameter length M.
    pub fn n_params(&self) -> usize {
        self.elements.len() * QUAD_PER_ELEMENT
    }

    pub fn elements(&self) -> &[ElementGeometry] {
        &self.elements
    }

    pub fn quad_coords(&self) -> Vec<[f64; 2]> {
        self.elements
            .iter()
            .flat_map(|g| g.points.iter().map(|p| p.coord))
            .collect()
    }

    /// Quadrature weight (times Jacobian) of every parameter slot.
    pub fn quad_weights(&self) -> Vec<f64> {
        self.elements
            .iter()
            .flat_map(|g| g.points.iter().map(|p| p.weight))
            .collect()
    }

    /// Sample a coordinate function at every quadrature point.
    pub fn interpolate_to_quad(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.quad_coords().into_iter().map(f).collect()
    }

    /// Nodal vector holding the prescribed Dirichlet values and zero elsewhere.
    pub fn dirichlet_lift(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.n_dofs()];
        for (i, v) in self.mesh.dirichlet_nodes() {
            y[i] = v;
        }
        y
    }

    fn check(&self, what: &'static str, v: &[f64], expected: usize) -> Result<(), FemError> {
        if v.len() == expected {
            Ok(())
        } else {
            Err(FemError::Dimension {
                what,
                expected,
                got: v.len(),
            })
        }
    }

    fn check_state(&self, y: &[f64], theta: &[f64], data: &[f64]) -> Result<(), FemError> {
        self.check("state", y, self.n_dofs())?;
        self.check("parameter", theta, self.n_params())?;
        if !data.is_empty() {
            self.check("input data", data, self.n_params())?;
        }
        Ok(())
    }

    fn local_input(&self, e: usize, y: &[f64], theta: &[f64]) -> [f64; 8] {
        let g = &self.elements[e];
        let mut x = [0.0; 8];
        for k in 0..4 {
            x[k] = y[g.nodes[k]];
            x[4 + k] = theta[4 * e + k];
        }
        x
    }

    fn local_direction(&self, e: usize, dy: &[f64], dtheta: &[f64]) -> [f64; 8] {
        let g = &self.elements[e];
        let mut x = [0.0; 8];
        for k in 0..4 {
            if !dy.is_empty() {
                x[k] = dy[g.nodes[k]];
            }
            if !dtheta.is_empty() {
                x[4 + k] = dtheta[4 * e + k];
            }
        }
        x
    }

    fn local_data(data: &[f64], e: usize) -> [f64; 4] {
        if data.is_empty() {
            [0.0; 4]
        } else {
            [data[4 * e], data[4 * e + 1], data[4 * e + 2], data[4 * e + 3]]
        }
    }

    fn local_observed(&self, e: usize, observed: &[f64]) -> [f64; 4] {
        if observed.is_empty() {
            return [0.0; 4];
        }
        let g = &self.elements[e];
        let mut out = [0.0; 4];
        for (o, qp) in out.iter_mut().zip(&g.points) {
            *o = (0..4).map(|k| qp.shape[k] * observed[g.nodes[k]]).sum();
        }
        out
    }

    fn residual_kernel<'a, F: WeakForm>(
        &'a self,
        e: usize,
        form: &'a F,
        data: &[f64],
    ) -> ElementResidual<'a, F> {
        ElementResidual {
            geom: &self.elements[e],
            form,
            data: Self::local_data(data, e),
        }
    }

    fn objective_kernel<'a, D: ObjectiveDensity>(
        &'a self,
        e: usize,
        density: &'a D,
        observed: &[f64],
    ) -> ElementObjective<'a, D> {
        ElementObjective {
            geom: &self.elements[e],
            density,
            observed: self.local_observed(e, observed),
        }
    }

    /// Cotangent restricted to unconstrained rows of element `e`.
    fn local_cotangent(&self, e: usize, w: &[f64]) -> [f64; 4] {
        let g = &self.elements[e];
        let mut c = [0.0; 4];
        for k in 0..4 {
            if !self.mesh.is_dirichlet(g.nodes[k]) {
                c[k] = w[g.nodes[k]];
            }
        }
        c
    }

    /// `-∫_ΓN t φ_i dΓ` for every node.
    pub fn neumann_load<F: WeakForm>(&self, form: &F) -> Vec<f64> {
        let mut load = vec![0.0; self.n_dofs()];
        for f in &self.facets {
            for &(w, phi, coord) in &f.points {
                let t = form.traction(coord);
                load[f.nodes[0]] -= w * t * phi[0];
                load[f.nodes[1]] -= w * t * phi[1];
            }
        }
        load
    }

    /// Residual `r(x, y, θ)` with Dirichlet rows replaced by `y_i - u_D,i`.
    pub fn residual<F: WeakForm>(
        &self,
        form: &F,
        y: &[f64],
        theta: &[f64],
        data: &[f64],
    ) -> Result<Vec<f64>, FemError> {
        self.check_state(y, theta, data)?;
        let mut r = self.neumann_load(form);
        let mut local = [0.0; 4];
        for (e, g) in self.elements.iter().enumerate() {
            let kernel = self.residual_kernel(e, form, data);
            kernel.eval(&self.local_input(e, y, theta), &mut local);
            if !local.iter().all(|v| v.is_finite()) {
                return Err(FemError::NonFinite(e));
            }
            for k in 0..4 {
                r[g.nodes[k]] += local[k];
            }
        }
        for (i, u_d) in self.mesh.dirichlet_nodes() {
            r[i] = y[i] - u_d;
        }
        Ok(r)
    }

    /// Exact `∂r/∂y`, one element-level JVP per local basis vector.
    pub fn jacobian<F: WeakForm>(
        &self,
        form: &F,
        y: &[f64],
        theta: &[f64],
        data: &[f64],
    ) -> Result<CsrMatrix, FemError> {
        self.check_state(y, theta, data)?;
        let n = self.n_dofs();
        let mut triplets = Vec::with_capacity(16 * self.elements.len() + n);
        for (e, g) in self.elements.iter().enumerate() {
            let kernel = self.residual_kernel(e, form, data);
            let x = self.local_input(e, y, theta);
            for col in 0..4 {
                let mut seed = [0.0; 8];
                seed[col] = 1.0;
                let column =
                    ad::jvp(&kernel, &x, &seed).map_err(|_| FemError::NonFinite(e))?;
                for (&node, &v) in g.nodes.iter().zip(&column) {
                    if !self.mesh.is_dirichlet(node) {
                        triplets.push((node, g.nodes[col], v));
                    }
                }
            }
        }
        for (i, _) in self.mesh.dirichlet_nodes() {
            triplets.push((i, i, 1.0));
        }
        Ok(CsrMatrix::from_triplets(n, n, &triplets)?)
    }

    /// `∂r/∂y · dy + ∂r/∂θ · dθ`. Either direction may be empty (zero).
    pub fn residual_jvp<F: WeakForm>(
        &self,
        form: &F,
        y: &[f64],
        theta: &[f64],
        data: &[f64],
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<Vec<f64>, FemError> {
        self.check_state(y, theta, data)?;
        if !dy.is_empty() {
            self.check("state direction", dy, self.n_dofs())?;
        }
        if !dtheta.is_empty() {
            self.check("parameter direction", dtheta, self.n_params())?;
        }
        let mut out = vec![0.0; self.n_dofs()];
        for (e, g) in self.elements.iter().enumerate() {
            let dir = self.local_direction(e, dy, dtheta);
            if dir.iter().all(|v| *v == 0.0) {
                continue;
            }
            let kernel = self.residual_kernel(e, form, data);
            let t = ad::jvp(&kernel, &self.local_input(e, y, theta), &dir)
                .map_err(|_| FemError::NonFinite(e))?;
            for k in 0..4 {
                out[g.nodes[k]] += t[k];
            }
        }
        for (i, _) in self.mesh.dirichlet_nodes() {
            out[i] = if dy.is_empty() { 0.0 } else { dy[i] };
        }
        Ok(out)
    }

    /// `(wᵀ ∂r/∂y, wᵀ ∂r/∂θ)`.
    pub fn residual_vjp<F: WeakForm>(
        &self,
        form: &F,
        y: &[f64],
        theta: &[f64],
        data: &[f64],
        w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), FemError> {
        self.check_state(y, theta, data)?;
        self.check("cotangent", w, self.n_dofs())?;
        let mut gy = vec![0.0; self.n_dofs()];
        let mut gtheta = vec![0.0; self.n_params()];
        for (e, g) in self.elements.iter().enumerate() {
            let cot = self.local_cotangent(e, w);
            if cot.iter().all(|v| *v == 0.0) {
                continue;
            }
            let kernel = self.residual_kernel(e, form, data);
            let local = ad::vjp(&kernel, &self.local_input(e, y, theta), &cot)
                .map_err(|_| FemError::NonFinite(e))?;
            for k in 0..4 {
                gy[g.nodes[k]] += local[k];
                gtheta[4 * e + k] += local[4 + k];
            }
        }
        for (i, _) in self.mesh.dirichlet_nodes() {
            gy[i] += w[i];
        }
        Ok((gy, gtheta))
    }

    /// `∂/∂(y, θ) [wᵀ (∂r/∂y · dy + ∂r/∂θ · dθ)]`, split into its state and
    /// parameter parts. Dirichlet rows are linear and drop out.
    #[allow(clippy::too_many_arguments)]
    pub fn residual_second_order<F: WeakForm>(
        &self,
        form: &F,
        y: &[f64],
        theta: &[f64],
        data: &[f64],
        mode: CompositionMode,
        w: &[f64],
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), FemError> {
        self.check_state(y, theta, data)?;
        self.check("cotangent", w, self.n_dofs())?;
        let mut sy = vec![0.0; self.n_dofs()];
        let mut stheta = vec![0.0; self.n_params()];
        for (e, g) in self.elements.iter().enumerate() {
            let cot = self.local_cotangent(e, w);
            let dir = self.local_direction(e, dy, dtheta);
            if cot.iter().all(|v| *v == 0.0) || dir.iter().all(|v| *v == 0.0) {
                continue;
            }
            let kernel = self.residual_kernel(e, form, data);
            let local = ad::second_order(&kernel, &self.local_input(e, y, theta), mode, &cot, &dir)
                .map_err(|_| FemError::NonFinite(e))?;
            for k in 0..4 {
                sy[g.nodes[k]] += local[k];
                stheta[4 * e + k] += local[4 + k];
            }
        }
        Ok((sy, stheta))
    }

    /// `∫ density(u, θ) dΩ` by quadrature. `observed` is nodal (or empty).
    pub fn integrate<D: ObjectiveDensity>(
        &self,
        density: &D,
        y: &[f64],
        theta: &[f64],
        observed: &[f64],
    ) -> Result<f64, FemError> {
        self.check_state(y, theta, &[])?;
        if !observed.is_empty() {
            self.check("observation", observed, self.n_dofs())?;
        }
        let mut total = 0.0;
        let mut out = [0.0];
        for e in 0..self.elements.len() {
            let kernel = self.objective_kernel(e, density, observed);
            kernel.eval(&self.local_input(e, y, theta), &mut out);
            if !out[0].is_finite() {
                return Err(FemError::NonFinite(e));
            }
            total += out[0];
        }
        Ok(total)
    }

    /// `(∂g/∂y, ∂g/∂θ)` of the integrated density.
    pub fn integrate_gradient<D: ObjectiveDensity>(
        &self,
        density: &D,
        y: &[f64],
        theta: &[f64],
        observed: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), FemError> {
        self.check_state(y, theta, &[])?;
        let mut gy = vec![0.0; self.n_dofs()];
        let mut gtheta = vec![0.0; self.n_params()];
        for (e, g) in self.elements.iter().enumerate() {
            let kernel = self.objective_kernel(e, density, observed);
            let local = ad::vjp(&kernel, &self.local_input(e, y, theta), &[1.0])
                .map_err(|_| FemError::NonFinite(e))?;
            for k in 0..4 {
                gy[g.nodes[k]] += local[k];
                gtheta[4 * e + k] += local[4 + k];
            }
        }
        Ok((gy, gtheta))
    }

    /// `∂/∂(y, θ) [∂g/∂y · dy + ∂g/∂θ · dθ]`, split into state and parameter parts.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_second_order<D: ObjectiveDensity>(
        &self,
        density: &D,
        y: &[f64],
        theta: &[f64],
        observed: &[f64],
        mode: CompositionMode,
        dy: &[f64],
        dtheta: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), FemError> {
        self.check_state(y, theta, &[])?;
        let mut sy = vec![0.0; self.n_dofs()];
        let mut stheta = vec![0.0; self.n_params()];
        for (e, g) in self.elements.iter().enumerate() {
            let dir = self.local_direction(e, dy, dtheta);
            if dir.iter().all(|v| *v == 0.0) {
                continue;
            }
            let kernel = self.objective_kernel(e, density, observed);
            let local =
                ad::second_order(&kernel, &self.local_input(e, y, theta), mode, &[1.0], &dir)
                    .map_err(|_| FemError::NonFinite(e))?;
            for k in 0..4 {
                sy[g.nodes[k]] += local[k];
                stheta[4 * e + k] += local[4 + k];
            }
        }
        Ok((sy, stheta))
    }
}
