//! Sparse kernels and dense brute-force oracles.

mod cg;
mod dense;
mod sparse;

pub use cg::{cg_solve, CgOptions, CgResult};
pub use dense::{
    cholesky, dense_generalized_eig, dense_generalized_eig_capped, jacobi_eig, sym_eig,
    tridiagonal_eig, try_cholesky, CholeskyFactor, DenseSymMatrix, PivotBreakdown, SymEigen,
    CHOLESKY_PIVOT_FLOOR, DENSE_EIG_CAP, JACOBI_MAX_ORDER,
};
pub use sparse::{sparse_identity, SparseSymBuilder, SparseSymMatrix};

/// y = A x as a free function (deterministic row-major accumulation).
pub fn spmv(a: &SparseSymMatrix, x: &[f64]) -> crate::error::Result<Vec<f64>> {
    a.mul_vec(x)
}
