//! Dense symmetric kernels: Cholesky, symmetric eigendecomposition and the
//! generalized pencil reduction used as the brute-force oracle.

use crate::error::{Error, Result};
use crate::linalg::sparse::SparseSymMatrix;

/// Order above which `sym_eig` switches from cyclic Jacobi to
/// tridiagonalization + implicit QL.
pub const JACOBI_MAX_ORDER: usize = 512;

/// Default cap on the order accepted by [`dense_generalized_eig`].
pub const DENSE_EIG_CAP: usize = 2000;

/// Relative pivot floor for Cholesky: factorization fails when a pivot drops
/// below this fraction of the largest diagonal entry.
pub const CHOLESKY_PIVOT_FLOOR: f64 = 1e-14;

/// Dense symmetric matrix, row-major. Symmetry is enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix {
    n: usize,
    a: Vec<f64>,
}

impl DenseSymMatrix {
    /// Builds from row-major data, averaging the two triangles.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "dense matrix: expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 0.5 * (data[i * n + j] + data[j * n + i]);
            }
        }
        Ok(Self { n, a })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.a[i * diag.len() + i] = d;
        }
        m
    }

    pub fn from_sparse(s: &SparseSymMatrix) -> Self {
        let n = s.order();
        let mut m = Self::zeros(n);
        for i in 0..n {
            let (cols, vals) = s.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.a[i * n + j] = v;
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Sets both (i, j) and (j, i).
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.a
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * x[j];
            }
            y[i] = acc;
        }
        y
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    /// Row-major lower triangle; entries above the diagonal are zero.
    l: Vec<f64>,
    /// Smallest pivot relative to the largest diagonal of the input.
    pub min_pivot_ratio: f64,
}

impl CholeskyFactor {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves L y = b in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.l[i * n + j] * b[j];
            }
            b[i] = acc / self.l[i * n + i];
        }
    }

    /// Solves L^T x = b in place.
    pub fn solve_lower_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..n {
                acc -= self.l[j * n + i] * b[j];
            }
            b[i] = acc / self.l[i * n + i];
        }
    }
}

/// Cholesky failure report: the offending pivot index and value.
#[derive(Debug, Clone, Copy)]
pub struct PivotBreakdown {
    pub index: usize,
    pub pivot: f64,
}

/// Cholesky factorization M = L L^T with a relative pivot floor, reporting
/// the failing pivot index on breakdown.
pub fn try_cholesky(m: &DenseSymMatrix) -> std::result::Result<CholeskyFactor, PivotBreakdown> {
    let n = m.order();
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(m.get(i, i)));
    let floor = CHOLESKY_PIVOT_FLOOR * max_diag.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    let mut min_ratio = f64::INFINITY;
    for i in 0..n {
        for j in 0..=i {
            let mut acc = m.get(i, j);
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(acc > floor) {
                    return Err(PivotBreakdown {
                        index: i,
                        pivot: acc,
                    });
                }
                min_ratio = min_ratio.min(acc / max_diag.max(f64::MIN_POSITIVE));
                l[i * n + j] = acc.sqrt();
            } else {
                l[i * n + j] = acc / l[j * n + j];
            }
        }
    }
    Ok(CholeskyFactor {
        n,
        l,
        min_pivot_ratio: min_ratio,
    })
}

/// Cholesky factorization M = L L^T with a relative pivot floor.
pub fn cholesky(m: &DenseSymMatrix) -> Result<CholeskyFactor> {
    if m.order() == 0 {
        return Err(Error::InvalidArgument("cholesky of empty matrix".into()));
    }
    try_cholesky(m).map_err(|b| {
        Error::Factorization(format!(
            "pivot {} at index {} below relative floor {}",
            b.pivot, b.index, CHOLESKY_PIVOT_FLOOR
        ))
    })
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector for `values[k]` (Euclidean-orthonormal).
    pub vectors: Vec<Vec<f64>>,
}

/// Eigendecomposition of a symmetric matrix. Cyclic Jacobi up to
/// [`JACOBI_MAX_ORDER`], Householder tridiagonalization + implicit QL above.
pub fn sym_eig(m: &DenseSymMatrix) -> Result<SymEigen> {
    if m.order() <= JACOBI_MAX_ORDER {
        jacobi_eig(m)
    } else {
        tridiagonal_eig(m)
    }
}

fn sort_pairs(mut values: Vec<f64>, vecs_cols: Vec<Vec<f64>>) -> SymEigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let sorted_vecs: Vec<Vec<f64>> = order.iter().map(|&i| vecs_cols[i].clone()).collect();
    let sorted_vals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    values.clear();
    SymEigen {
        values: sorted_vals,
        vectors: sorted_vecs,
    }
}

/// Cyclic Jacobi with a relative rotation threshold. The relative threshold
/// keeps small eigenvalues of positive definite matrices accurate to roughly
/// machine relative precision.
pub fn jacobi_eig(m: &DenseSymMatrix) -> Result<SymEigen> {
    let n = m.order();
    let mut a = m.data().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n == 1 {
        return Ok(SymEigen {
            values: vec![a[0]],
            vectors: vec![vec![1.0]],
        });
    }
    let fro = m.frobenius_norm();
    const MAX_SWEEPS: usize = 60;
    const REL_TOL: f64 = 1e-16;
    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut off2 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off2 += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off2.sqrt() <= 1e-14 * fro {
            converged = true;
        }
        let mut rotated = false;
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let den = (a[p * n + p].abs() * a[q * n + q].abs()).sqrt();
                if den > 0.0 && apq.abs() <= REL_TOL * den {
                    continue;
                }
                rotated = true;
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e154 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[r * n + p];
                        let arq = a[r * n + q];
                        let new_rp = arp - s * (arq + tau * arp);
                        let new_rq = arq + s * (arp - tau * arq);
                        a[r * n + p] = new_rp;
                        a[p * n + r] = new_rp;
                        a[r * n + q] = new_rq;
                        a[q * n + r] = new_rq;
                    }
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        if !rotated || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::IterationLimit(
            "jacobi eigendecomposition did not converge".into(),
        ));
    }
    let values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| v[i * n + j]).collect())
        .collect();
    Ok(sort_pairs(values, vectors))
}

/// Householder tridiagonalization followed by implicit-shift QL.
pub fn tridiagonal_eig(m: &DenseSymMatrix) -> Result<SymEigen> {
    let n = m.order();
    let mut a = m.data().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // Reduce to tridiagonal form, accumulating the transformation in `a`.
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[i * n + k].abs();
            }
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut fsum = 0.0;
                for j in 0..=l {
                    a[j * n + i] = a[i * n + j] / h;
                    let mut g2 = 0.0;
                    for k in 0..=j {
                        g2 += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g2 += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g2 / h;
                    fsum += e[j] * a[i * n + j];
                }
                let hh = fsum / (h + h);
                for j in 0..=l {
                    let f2 = a[i * n + j];
                    let g2 = e[j] - hh * f2;
                    e[j] = g2;
                    for k in 0..=j {
                        a[j * n + k] -= f2 * e[k] + g2 * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[i * n + k] * a[k * n + j];
                }
                for k in 0..i {
                    a[k * n + j] -= g * a[k * n + i];
                }
            }
        }
        d[i] = a[i * n + i];
        a[i * n + i] = 1.0;
        for j in 0..i {
            a[j * n + i] = 0.0;
            a[i * n + j] = 0.0;
        }
    }

    // Implicit-shift QL on (d, e), rotating the columns of `a` along.
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::IterationLimit(
                    "QL iteration did not converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[mm] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..mm).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = a[k * n + i + 1];
                    a[k * n + i + 1] = s * a[k * n + i] + c * f;
                    a[k * n + i] = c * a[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }

    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j]).collect())
        .collect();
    Ok(sort_pairs(d, vectors))
}

/// All eigenpairs of the symmetric-definite pencil A x = lambda M x.
///
/// M is Cholesky-factored, the pencil reduced to a single symmetric matrix
/// L^{-1} A L^{-T}, and the eigenvectors are mapped back so that the returned
/// block is M-orthonormal. Values ascend.
pub fn dense_generalized_eig(
    a: &DenseSymMatrix,
    m: &DenseSymMatrix,
) -> Result<crate::eigensolver::EigenResult> {
    dense_generalized_eig_capped(a, m, DENSE_EIG_CAP)
}

pub fn dense_generalized_eig_capped(
    a: &DenseSymMatrix,
    m: &DenseSymMatrix,
    cap: usize,
) -> Result<crate::eigensolver::EigenResult> {
    use crate::eigensolver::{EigenResult, SolverKind};

    let n = a.order();
    if m.order() != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil orders differ: {} vs {}",
            n,
            m.order()
        )));
    }
    if n > cap {
        return Err(Error::InvalidArgument(format!(
            "order {} exceeds dense cap {}",
            n, cap
        )));
    }
    let chol = cholesky(m)?;

    // C = L^{-1} A L^{-T}, built column by column.
    let mut c = DenseSymMatrix::zeros(n);
    let mut col = vec![0.0; n];
    let mut w = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            col[i] = a.get(i, j);
        }
        chol.solve_lower(&mut col);
        for i in 0..n {
            w[i * n + j] = col[i];
        }
    }
    // C = W L^{-T}; row i of the product is L^{-1} applied to row i of W.
    for i in 0..n {
        let row = &mut w[i * n..(i + 1) * n];
        chol.solve_lower(row);
    }
    for i in 0..n {
        for j in 0..=i {
            let sym = 0.5 * (w[i * n + j] + w[j * n + i]);
            c.set_sym(i, j, sym);
        }
    }

    let reduced_trace = c.trace();
    let eig = sym_eig(&c)?;

    let mut vectors = Vec::with_capacity(n);
    for u in &eig.vectors {
        let mut x = u.clone();
        chol.solve_lower_transpose(&mut x);
        vectors.push(x);
    }

    let norm_a = a.frobenius_norm();
    let norm_m = m.frobenius_norm();
    let mut residuals = Vec::with_capacity(n);
    for (k, x) in vectors.iter().enumerate() {
        let ax = a.mul_vec(x);
        let mx = m.mul_vec(x);
        let lam = eig.values[k];
        let r2: f64 = ax
            .iter()
            .zip(&mx)
            .map(|(&ai, &mi)| {
                let r = ai - lam * mi;
                r * r
            })
            .sum();
        residuals.push(r2.sqrt());
    }

    Ok(EigenResult {
        values: eig.values,
        vectors,
        residuals,
        iterations: 0,
        solver: SolverKind::Dense,
        norm_a,
        norm_m,
        reduced_trace: Some(reduced_trace),
    })
}
