//! Bilinear quadrilateral finite elements on structured unit-square meshes.
//!
//! Parameters live at volume quadrature points, element-major:
//! `theta[4 * e + q]`. States live at mesh nodes.

mod assembly;
mod forms;
mod mesh;
mod quadrature;

pub use assembly::{
    DensityPoint, Discretization, ElementGeometry, ObjectiveDensity, PointState, QuadPoint,
    WeakForm,
};
pub use forms::{L2Misfit, LinearPoisson, NonlinearPoisson, SourceField};
pub use mesh::{build_unit_square_mesh, Mesh, NeumannFacet, Side};
pub use quadrature::{shape_gradients, shape_values, QuadratureRule};

use crate::ad::AdError;
use crate::sparse::SparseError;

/// Quadrature points per element.
pub const QUAD_PER_ELEMENT: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("mesh needs at least one element in each direction (got {nx}x{ny})")]
    EmptyMesh { nx: usize, ny: usize },
    #[error("side {0:?} is both Dirichlet and Neumann")]
    BoundaryOverlap(Side),
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("element {0} has a non-positive Jacobian determinant")]
    InvertedElement(usize),
    #[error("non-finite value assembled in element {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

