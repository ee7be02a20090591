use crate::math::sqrt;

/// Reference coordinates of the four element nodes, counterclockwise.
pub const REFERENCE_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Tensor Gauss rule on the bi-unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: [[f64; 2]; 4],
    pub weights: [f64; 4],
}

impl QuadratureRule {
    /// 2×2 Gauss-Legendre, points ordered like the element nodes.
    pub fn gauss_2x2() -> Self {
        let a = 1.0 / sqrt(3.0);
        QuadratureRule {
            points: [[-a, -a], [a, -a], [a, a], [-a, a]],
            weights: [1.0; 4],
        }
    }
}

/// Two-point Gauss-Legendre on [-1, 1].
pub(crate) fn gauss_line() -> ([f64; 2], [f64; 2]) {
    let a = 1.0 / sqrt(3.0);
    ([-a, a], [1.0, 1.0])
}

/// Bilinear shape functions at a reference point.
pub fn shape_values(xi: [f64; 2]) -> [f64; 4] {
    let mut phi = [0.0; 4];
    for (p, n) in phi.iter_mut().zip(REFERENCE_NODES) {
        *p = 0.25 * (1.0 + n[0] * xi[0]) * (1.0 + n[1] * xi[1]);
    }
    phi
}

/// Reference-coordinate gradients of the bilinear shape functions.
pub fn shape_gradients(xi: [f64; 2]) -> [[f64; 2]; 4] {
    let mut g = [[0.0; 2]; 4];
    for (gi, n) in g.iter_mut().zip(REFERENCE_NODES) {
        gi[0] = 0.25 * n[0] * (1.0 + n[1] * xi[1]);
        gi[1] = 0.25 * n[1] * (1.0 + n[0] * xi[0]);
    }
    g
}
