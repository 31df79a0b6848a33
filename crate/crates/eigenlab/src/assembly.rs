//! P1 assembly of the stiffness matrix, the mass matrix and analytic load
//! vectors, plus the source-problem solve.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::{cg_solve, CgOptions, SparseSymBuilder, SparseSymMatrix};
use crate::mesh::{BoundaryCondition, DofMap, Mesh, Point};
use crate::quadrature::{simplex_rule, QuadratureSpec};

/// d x d coefficient sample stored in the top-left block of a 3 x 3 array.
pub type CoefficientMatrix = [[f64; 3]; 3];

/// Matrix-valued diffusion coefficient with declared spectral bounds.
pub struct CoefficientField {
    eval: Box<dyn Fn(&Point) -> CoefficientMatrix + Send + Sync>,
    /// Declared (alpha_0, alpha_1): every eigenvalue of alpha(x) must lie in
    /// this interval.
    pub bounds: (f64, f64),
}

impl CoefficientField {
    pub fn identity() -> Self {
        Self::scalar(1.0).expect("unit coefficient")
    }

    /// alpha(x) = c I.
    pub fn scalar(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Coefficient(format!(
                "scalar coefficient must be positive, got {}",
                c
            )));
        }
        Ok(Self {
            eval: Box::new(move |_| {
                let mut m = [[0.0; 3]; 3];
                for (k, row) in m.iter_mut().enumerate() {
                    row[k] = c;
                }
                m
            }),
            bounds: (c, c),
        })
    }

    pub fn from_fn<F>(f: F, bounds: (f64, f64)) -> Self
    where
        F: Fn(&Point) -> CoefficientMatrix + Send + Sync + 'static,
    {
        Self {
            eval: Box::new(f),
            bounds,
        }
    }

    pub fn evaluate(&self, x: &Point) -> CoefficientMatrix {
        (self.eval)(x)
    }

    /// Verifies symmetry and the declared eigenvalue bounds of one sample.
    pub fn check_sample(&self, dim: usize, x: &Point) -> Result<()> {
        let a = self.evaluate(x);
        let scale = self.bounds.1.max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::Coefficient(format!(
                        "sample at {:?} is not symmetric",
                        &x[..dim]
                    )));
                }
            }
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = a[i][j];
            }
        }
        let m = crate::linalg::DenseSymMatrix::from_row_major(dim, &data)?;
        let eig = crate::linalg::sym_eig(&m)?;
        let slack = 1e-10 * scale;
        let (lo, hi) = self.bounds;
        for &ev in &eig.values {
            if ev < lo - slack || ev > hi + slack {
                return Err(Error::Coefficient(format!(
                    "eigenvalue {} of sample at {:?} outside [{}, {}]",
                    ev,
                    &x[..dim],
                    lo,
                    hi
                )));
            }
        }
        Ok(())
    }
}

/// Constant P1 barycentric gradients of a cell and its volume.
///
/// Row 0 is the gradient of the barycentric function of the first cell
/// vertex; rows 1..=d follow the remaining vertices.
pub fn p1_gradients(mesh: &Mesh, c: usize) -> ([[f64; 3]; 4], f64) {
    let d = mesh.dim();
    let cell = mesh.cell(c);
    let p0 = mesh.vertex(cell[0]);
    let mut b = [[0.0; 3]; 3];
    for i in 0..d {
        let pi = mesh.vertex(cell[i + 1]);
        for k in 0..d {
            b[k][i] = pi[k] - p0[k];
        }
    }
    let (inv, det) = invert_small(&b, d);
    let volume = det.abs()
        / match d {
            1 => 1.0,
            2 => 2.0,
            _ => 6.0,
        };
    let mut grads = [[0.0; 3]; 4];
    for i in 0..d {
        for k in 0..d {
            // gradient of barycentric coordinate i+1 is row i of B^{-1}
            grads[i + 1][k] = inv[i][k];
        }
    }
    for k in 0..d {
        let mut s = 0.0;
        for i in 1..=d {
            s += grads[i][k];
        }
        grads[0][k] = -s;
    }
    (grads, volume)
}

fn invert_small(b: &[[f64; 3]; 3], d: usize) -> ([[f64; 3]; 3], f64) {
    let mut inv = [[0.0; 3]; 3];
    match d {
        1 => {
            let det = b[0][0];
            inv[0][0] = 1.0 / det;
            (inv, det)
        }
        2 => {
            let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
            inv[0][0] = b[1][1] / det;
            inv[0][1] = -b[0][1] / det;
            inv[1][0] = -b[1][0] / det;
            inv[1][1] = b[0][0] / det;
            (inv, det)
        }
        3 => {
            let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
                - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
                + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
            let cof = |r1: usize, c1: usize, r2: usize, c2: usize| {
                b[r1][c1] * b[r2][c2] - b[r1][c2] * b[r2][c1]
            };
            inv[0][0] = cof(1, 1, 2, 2) / det;
            inv[0][1] = -cof(0, 1, 2, 2) / det;
            inv[0][2] = cof(0, 1, 1, 2) / det;
            inv[1][0] = -cof(1, 0, 2, 2) / det;
            inv[1][1] = cof(0, 0, 2, 2) / det;
            inv[1][2] = -cof(0, 0, 1, 2) / det;
            inv[2][0] = cof(1, 0, 2, 1) / det;
            inv[2][1] = -cof(0, 0, 2, 1) / det;
            inv[2][2] = cof(0, 0, 1, 1) / det;
            (inv, det)
        }
        _ => unreachable!(),
    }
}

/// Stiffness matrix on the free DOFs: A_ij = sum_T |T| grad phi_i . alpha(x_T) grad phi_j
/// with alpha sampled at cell barycenters (exact for constant alpha).
/// Cells are assembled in ascending index order.
pub fn assemble_stiffness(
    mesh: &Mesh,
    alpha: &CoefficientField,
    dofs: &DofMap,
) -> Result<SparseSymMatrix> {
    let d = mesh.dim();
    let mut builder = SparseSymBuilder::new(dofs.n_dofs());
    for c in 0..mesh.n_cells() {
        let (grads, vol) = p1_gradients(mesh, c);
        if !(vol > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "cell {} has non-positive volume",
                c
            )));
        }
        let xc = mesh.cell_barycenter(c);
        alpha.check_sample(d, &xc)?;
        let a = alpha.evaluate(&xc);
        let cell = mesh.cell(c);
        for li in 0..=d {
            let di = match dofs.dof_of_vertex(cell[li]) {
                Some(dof) => dof,
                None => continue,
            };
            for lj in li..=d {
                let dj = match dofs.dof_of_vertex(cell[lj]) {
                    Some(dof) => dof,
                    None => continue,
                };
                let mut alpha_gj = [0.0; 3];
                for r in 0..d {
                    for s in 0..d {
                        alpha_gj[r] += a[r][s] * grads[lj][s];
                    }
                }
                let mut k = 0.0;
                for r in 0..d {
                    k += grads[li][r] * alpha_gj[r];
                }
                builder.add_sym(di, dj, vol * k);
            }
        }
    }
    Ok(builder.build())
}

/// Mass matrix on the free DOFs via the exact P1 element formula
/// M^T_ij = |T| (1 + delta_ij) / ((d+1)(d+2)).
pub fn assemble_mass(mesh: &Mesh, dofs: &DofMap) -> Result<SparseSymMatrix> {
    let d = mesh.dim();
    let scale = 1.0 / ((d + 1) as f64 * (d + 2) as f64);
    let mut builder = SparseSymBuilder::new(dofs.n_dofs());
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_signed_volume(c);
        if !(vol > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "cell {} has non-positive volume",
                c
            )));
        }
        let cell = mesh.cell(c);
        for li in 0..=d {
            let di = match dofs.dof_of_vertex(cell[li]) {
                Some(dof) => dof,
                None => continue,
            };
            for lj in li..=d {
                let dj = match dofs.dof_of_vertex(cell[lj]) {
                    Some(dof) => dof,
                    None => continue,
                };
                let factor = if li == lj { 2.0 } else { 1.0 };
                builder.add_sym(di, dj, vol * factor * scale);
            }
        }
    }
    Ok(builder.build())
}

/// Load vector b_i = int_Omega w phi_i by composite simplex quadrature.
pub fn assemble_analytic_inner_products(
    mesh: &Mesh,
    w: &dyn Field,
    dofs: &DofMap,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let d = mesh.dim();
    let rule = simplex_rule(d, quad);
    let mut b = vec![0.0; dofs.n_dofs()];
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        let p0 = mesh.vertex_point(cell[0]);
        let vol = mesh.cell_signed_volume(c);
        for &(xi, wq) in &rule.points {
            let mut x = p0;
            for i in 0..d {
                let pi = mesh.vertex(cell[i + 1]);
                for k in 0..d {
                    x[k] += xi[i] * (pi[k] - p0[k]);
                }
            }
            let wx = w.value(&x) * wq * vol;
            let mut lambda0 = 1.0;
            for i in 0..d {
                lambda0 -= xi[i];
            }
            for (li, &v) in cell.iter().enumerate() {
                if let Some(dof) = dofs.dof_of_vertex(v) {
                    let lam = if li == 0 { lambda0 } else { xi[li - 1] };
                    b[dof] += wx * lam;
                }
            }
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy)]
pub struct SourceSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SourceSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

/// Solves A mu = b. Dirichlet systems are SPD; Neumann systems are singular
/// with the constant null space, require a consistent right-hand side, and
/// return the solution with zero mean in the M-inner product when a mass
/// matrix is supplied (Euclidean zero mean otherwise).
pub fn solve_source(
    a: &SparseSymMatrix,
    b: &[f64],
    bc: BoundaryCondition,
    mass: Option<&SparseSymMatrix>,
    opts: &SourceSolveOptions,
) -> Result<Vec<f64>> {
    let cg_opts = CgOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        deflate_constants: bc == BoundaryCondition::Neumann,
        jacobi: true,
    };
    if bc == BoundaryCondition::Neumann {
        let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sum_b: f64 = b.iter().sum();
        if norm_b > 0.0 && sum_b.abs() > 1e-8 * norm_b * (b.len() as f64).sqrt() {
            return Err(Error::Consistency(format!(
                "Neumann right-hand side has nonzero mean component {}",
                sum_b
            )));
        }
    }
    let mut x = cg_solve(a, b, &cg_opts)?.x;
    if bc == BoundaryCondition::Neumann {
        if let Some(m) = mass {
            let ones = vec![1.0; x.len()];
            let mx = m.mul_vec(&x)?;
            let m1 = m.mul_vec(&ones)?;
            let num: f64 = mx.iter().sum();
            let den: f64 = m1.iter().sum();
            let shift = num / den;
            for xi in x.iter_mut() {
                *xi -= shift;
            }
        }
    }
    Ok(x)
}
