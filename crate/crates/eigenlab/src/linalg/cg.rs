//! Conjugate gradients for SPD (or consistently-deflated SPSD) systems.

use crate::error::{Error, Result};
use crate::linalg::sparse::SparseSymMatrix;

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Project right-hand side and iterates against the constant vector;
    /// required for singular Neumann stiffness systems.
    pub deflate_constants: bool,
    /// Diagonal (Jacobi) preconditioning.
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            deflate_constants: false,
            jacobi: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual ||b - Ax|| / ||b||.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for vi in v.iter_mut() {
        *vi -= mean;
    }
}

/// Preconditioned CG. Deterministic: all reductions are plain sequential
/// sums in index order.
pub fn cg_solve(a: &SparseSymMatrix, b: &[f64], opts: &CgOptions) -> Result<CgResult> {
    let n = a.order();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "cg: matrix order {} vs rhs length {}",
            n,
            b.len()
        )));
    }
    let mut rhs = b.to_vec();
    if opts.deflate_constants {
        remove_mean(&mut rhs);
    }
    let norm_b = dot(&rhs, &rhs).sqrt();
    if norm_b == 0.0 {
        return Ok(CgResult {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Option<Vec<f64>> = if opts.jacobi {
        Some(
            a.diagonal()
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        )
    } else {
        None
    };

    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let mut z = match &inv_diag {
        Some(di) => r.iter().zip(di).map(|(&ri, &d)| ri * d).collect(),
        None => r.clone(),
    };
    if opts.deflate_constants {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=opts.max_iter {
        a.mul_vec_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Factorization(format!(
                "cg: non-positive curvature {} at iteration {}",
                pap, it
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if opts.deflate_constants {
            remove_mean(&mut r);
        }
        let rel = dot(&r, &r).sqrt() / norm_b;
        if rel <= opts.tol {
            return Ok(CgResult {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        match &inv_diag {
            Some(di) => {
                for i in 0..n {
                    z[i] = r[i] * di[i];
                }
            }
            None => z.copy_from_slice(&r),
        }
        if opts.deflate_constants {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::IterationLimit(format!(
        "cg did not reach tol {} in {} iterations",
        opts.tol, opts.max_iter
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::{sparse_identity, SparseSymBuilder};

    fn laplace_1d_dirichlet(n: usize) -> SparseSymMatrix {
        // Free DOFs of the uniform interval mesh with n cells.
        let h = 1.0 / n as f64;
        let nf = n - 1;
        let mut b = SparseSymBuilder::new(nf);
        for i in 0..nf {
            b.add_sym(i, i, 2.0 / h);
            if i + 1 < nf {
                b.add_sym(i, i + 1, -1.0 / h);
            }
        }
        b.build()
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = sparse_identity(10);
        let b: Vec<f64> = (0..10).map(|i| i as f64 - 4.0).collect();
        let r = cg_solve(&a, &b, &CgOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        for i in 0..10 {
            assert!((r.x[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dirichlet_1d_converges_within_200_iterations() {
        let a = laplace_1d_dirichlet(64);
        let mut state = 42u64;
        let b: Vec<f64> = (0..a.order())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let opts = CgOptions {
            tol: 1e-10,
            max_iter: 200,
            ..CgOptions::default()
        };
        let r = cg_solve(&a, &b, &opts).unwrap();
        assert!(r.relative_residual <= 1e-10);
        assert!(r.iterations <= 200);
    }

    #[test]
    fn recovers_random_solution() {
        let a = laplace_1d_dirichlet(32);
        let x_true: Vec<f64> = (0..a.order()).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul_vec(&x_true).unwrap();
        let opts = CgOptions {
            tol: 1e-12,
            max_iter: 500,
            ..CgOptions::default()
        };
        let r = cg_solve(&a, &b, &opts).unwrap();
        let norm: f64 = x_true.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..a.order() {
            assert!((r.x[i] - x_true[i]).abs() <= 1e-8 * norm);
        }
    }

    #[test]
    fn deflated_neumann_gives_zero_mean_solution() {
        // Neumann 1D stiffness: singular with constant null space.
        let n = 16;
        let h = 1.0 / n as f64;
        let mut bld = SparseSymBuilder::new(n + 1);
        for e in 0..n {
            bld.add_sym(e, e, 1.0 / h);
            bld.add_sym(e + 1, e + 1, 1.0 / h);
            bld.add_sym(e, e + 1, -1.0 / h);
        }
        let a = bld.build();
        let mut b: Vec<f64> = (0..=n).map(|i| (i as f64 * 0.71).cos()).collect();
        remove_mean(&mut b);
        let opts = CgOptions {
            tol: 1e-11,
            max_iter: 500,
            deflate_constants: true,
            ..CgOptions::default()
        };
        let r = cg_solve(&a, &b, &opts).unwrap();
        let mean: f64 = r.x.iter().sum::<f64>() / r.x.len() as f64;
        assert!(mean.abs() < 1e-12);
        assert!(r.relative_residual <= 1e-11);
    }
}
