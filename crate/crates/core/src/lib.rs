//! Differentiable finite elements with exact implicit first and second
//! derivatives.
//!
//! The crate is `no_std` (it needs `alloc`). Modules, bottom up:
//!
//! * [`ad`]: forward/reverse AD over generic scalar kernels and the three
//!   second-order compositions.
//! * [`sparse`]: compressed-row matrices and a banded LU factorization with
//!   transpose solves.
//! * [`fem`]: structured quadrilateral meshes, bilinear elements, 2×2 Gauss
//!   quadrature and AD-driven assembly.
//! * [`implicit`]: forward and adjoint solves, implicit gradients and
//!   Hessian-vector products.
//! * [`optimize`]: L-BFGS and truncated Newton-CG.
//! * [`bench`]: benchmark problems and the verification protocols.
#![no_std]

extern crate alloc;

pub mod ad;
pub mod bench;
pub mod fem;
pub mod implicit;
pub mod math;
pub mod optimize;
pub mod sparse;
