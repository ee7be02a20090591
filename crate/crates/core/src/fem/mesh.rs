use alloc::vec;
use alloc::vec::Vec;

use super::FemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// x₁ = 0
    Left,
    /// x₁ = 1
    Right,
    /// x₂ = 0
    Bottom,
    /// x₂ = 1
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

/// Boundary edge carrying a Neumann condition. `local_edge` k joins local
/// nodes k and (k+1) mod 4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannFacet {
    pub element: usize,
    pub local_edge: usize,
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise node indices.
    pub elements: Vec<[usize; 4]>,
    pub neumann_facets: Vec<NeumannFacet>,
    /// Prescribed value per node, `None` for free nodes.
    dirichlet: Vec<Option<f64>>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn dirichlet_value(&self, node: usize) -> Option<f64> {
        self.dirichlet[node]
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node].is_some()
    }

    /// Constrained nodes in increasing order.
    pub fn dirichlet_nodes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.dirichlet
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    /// Overwrite the prescribed values on constrained nodes with `u_d(x)`.
    pub fn set_dirichlet_values(&mut self, u_d: impl Fn([f64; 2]) -> f64) {
        for (slot, x) in self.dirichlet.iter_mut().zip(&self.nodes) {
            if let Some(v) = slot {
                *v = u_d(*x);
            }
        }
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
}

/// Structured `nx × ny` mesh of the unit square. Dirichlet nodes get value
/// zero; use [`Mesh::set_dirichlet_values`] for anything else.
pub fn build_unit_square_mesh(
    nx: usize,
    ny: usize,
    dirichlet: &[Side],
    neumann: &[Side],
) -> Result<Mesh, FemError> {
    if nx == 0 || ny == 0 {
        return Err(FemError::EmptyMesh { nx, ny });
    }
    if let Some(side) = dirichlet.iter().find(|s| neumann.contains(s)) {
        return Err(FemError::BoundaryOverlap(*side));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }

    let on_side = |side: Side, i: usize, j: usize| match side {
        Side::Left => i == 0,
        Side::Right => i == nx,
        Side::Bottom => j == 0,
        Side::Top => j == ny,
    };
    let mut constrained = vec![None; nodes.len()];
    for j in 0..=ny {
        for i in 0..=nx {
            if dirichlet.iter().any(|&s| on_side(s, i, j)) {
                constrained[idx(i, j)] = Some(0.0);
            }
        }
    }

    let mut neumann_facets = Vec::new();
    for &side in Side::ALL.iter().filter(|s| neumann.contains(s)) {
        let (local_edge, cells): (usize, Vec<usize>) = match side {
            Side::Bottom => (0, (0..nx).collect()),
            Side::Right => (1, (0..ny).map(|j| j * nx + nx - 1).collect()),
            Side::Top => (2, (0..nx).map(|i| (ny - 1) * nx + i).collect()),
            Side::Left => (3, (0..ny).map(|j| j * nx).collect()),
        };
        neumann_facets.extend(cells.into_iter().map(|element| NeumannFacet {
            element,
            local_edge,
            normal: side.outward_normal(),
        }));
    }

    Ok(Mesh {
        nx,
        ny,
        nodes,
        elements,
        neumann_facets,
        dirichlet: constrained,
    })
}
