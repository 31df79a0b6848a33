// Index loops over symmetric-matrix kernels read better than iterator
// chains, and `!(x > 0.0)` deliberately catches NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

//! Finite element spectral laboratory.
//!
//! Assembles P1 discrete elliptic operators on structured simplicial meshes
//! of intervals, rectangles and boxes, computes discrete spectra (dense
//! oracle and LOBPCG) alongside the exact continuous spectra of the model
//! domains, and verifies the spectral inequalities that connect them:
//! two-sided eigenvalue bounds, Weyl-type growth, Courant-Fischer min-max
//! principles, and projection-based eigenvalue error estimates.

pub mod assembly;
pub mod cli;
pub mod eigensolver;
pub mod error;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod minmax;
pub mod projection;
pub mod quadrature;
pub mod report;
pub mod spectra;

pub use error::{Error, Result};
