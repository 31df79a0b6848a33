//! Smallest eigenpairs of the sparse symmetric pencil (A, M): LOBPCG with
//! soft locking, plus Rayleigh quotients and an independent residual check.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, DenseSymMatrix, SparseSymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    Lobpcg,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverKind::Dense => write!(f, "dense"),
            SolverKind::Lobpcg => write!(f, "lobpcg"),
        }
    }
}

/// Ascending eigenvalues with M-orthonormal eigenvectors and residuals.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Absolute residual norms ||A x - lambda M x||_2.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub solver: SolverKind,
    /// Frobenius norms of A and M, the scale of the relative residual.
    pub norm_a: f64,
    pub norm_m: f64,
    /// Trace of the Cholesky-reduced operator (dense path only).
    pub reduced_trace: Option<f64>,
}

impl EigenResult {
    /// Relative residual of pair `k`:
    /// ||Ax - lambda M x|| / ((||A|| + |lambda| ||M||) ||x||).
    pub fn relative_residual(&self, k: usize) -> f64 {
        let x_norm = self.vectors[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        self.residuals[k] / ((self.norm_a + self.values[k].abs() * self.norm_m) * x_norm)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LobpcgOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
            seed: 0,
        }
    }
}

type Block = Vec<Vec<f64>>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn block_mul(m: &SparseSymMatrix, b: &Block) -> Result<Block> {
    b.iter().map(|col| m.mul_vec(col)).collect()
}

/// Gram matrix u_i^T v_j (v usually pre-multiplied by M or A).
fn gram(u: &Block, v: &Block) -> DenseSymMatrix {
    let k = u.len();
    let mut g = DenseSymMatrix::zeros(k);
    for i in 0..k {
        for j in i..k {
            let gij = dot(&u[i], &v[j]);
            g.set_sym(i, j, gij);
        }
    }
    g
}

fn apply_inv_transpose(block: &mut Block, chol: &crate::linalg::CholeskyFactor) {
    // S <- S L^{-T}: forward substitution over columns.
    let k = block.len();
    for j in 0..k {
        let (head, tail) = block.split_at_mut(j);
        let col = &mut tail[0];
        for (i, prev) in head.iter().enumerate() {
            let lij = chol.get(j, i);
            if lij != 0.0 {
                for (c, p) in col.iter_mut().zip(prev) {
                    *c -= lij * p;
                }
            }
        }
        let diag = chol.get(j, j);
        for c in col.iter_mut() {
            *c /= diag;
        }
    }
}

/// In-place M-orthonormalization by Cholesky of the block Gram matrix with
/// one re-orthogonalization pass. Columns past `protected` that turn out
/// numerically dependent are dropped; a dependent column within the
/// protected range is a breakdown.
fn orthonormalize_m(block: &mut Block, m: &SparseSymMatrix, protected: usize) -> Result<()> {
    for _pass in 0..2 {
        loop {
            let mb = block_mul(m, block)?;
            let g = gram(block, &mb);
            match crate::linalg::try_cholesky(&g) {
                Ok(chol) => {
                    apply_inv_transpose(block, &chol);
                    break;
                }
                Err(b) if b.index >= protected => {
                    block.remove(b.index);
                }
                Err(b) => {
                    return Err(Error::Factorization(format!(
                        "Gram matrix breakdown at protected column {} (pivot {})",
                        b.index, b.pivot
                    )));
                }
            }
        }
    }
    Ok(())
}

fn random_block(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Block {
    (0..k)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Scales each column to unit M-norm (dropping exact zeros) so the Gram
/// pivot floor measures directional dependence, not column magnitude.
fn normalize_columns_m(block: &mut Block, m: &SparseSymMatrix) -> Result<()> {
    let mut keep = Vec::with_capacity(block.len());
    for col in block.drain(..) {
        let mc = m.mul_vec(&col)?;
        let norm2 = dot(&col, &mc);
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            keep.push(col.iter().map(|&v| v * inv).collect());
        }
    }
    *block = keep;
    Ok(())
}

/// Rayleigh-Ritz on an M-orthonormal basis: returns ascending values and the
/// basis-coefficient matrix (columns are ritz vectors in basis coordinates).
fn rayleigh_ritz(basis: &Block, a: &SparseSymMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let ab = block_mul(a, basis)?;
    let h = gram(basis, &ab);
    let eig = sym_eig(&h)?;
    Ok((eig.values, eig.vectors))
}

fn combine(basis: &Block, coeffs: &[Vec<f64>], take: usize) -> Block {
    let n = basis.first().map_or(0, |c| c.len());
    let mut out = Vec::with_capacity(take);
    for cvec in coeffs.iter().take(take) {
        let mut col = vec![0.0; n];
        for (b, &c) in basis.iter().zip(cvec) {
            if c != 0.0 {
                for (o, &bv) in col.iter_mut().zip(b) {
                    *o += c * bv;
                }
            }
        }
        out.push(col);
    }
    out
}

/// k smallest eigenpairs of A x = lambda M x by LOBPCG: block size
/// k + max(5, ceil(k/5)), diagonal-of-A preconditioning, deterministic
/// seeded start, soft locking of converged pairs. Convergence is the
/// relative residual ||Ax - lambda Mx|| / ((||A|| + |lambda| ||M||) ||x||).
pub fn lobpcg_smallest(
    a: &SparseSymMatrix,
    m: &SparseSymMatrix,
    k: usize,
    opts: &LobpcgOptions,
) -> Result<EigenResult> {
    let n = a.order();
    if m.order() != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil orders differ: {} vs {}",
            n,
            m.order()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {} eigenpairs of an order-{} pencil",
            k, n
        )));
    }
    let pad = 5usize.max(k.div_ceil(5));
    let bs = (k + pad).min(n);
    let norm_a = a.frobenius_norm();
    let norm_m = m.frobenius_norm();
    let precond: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut restarts_left = 1;

    let mut x = random_block(n, bs, &mut rng);
    orthonormalize_m(&mut x, m, 0)?;
    while x.len() < bs {
        // A dependent random column is astronomically unlikely; top up.
        x.extend(random_block(n, bs - x.len(), &mut rng));
        orthonormalize_m(&mut x, m, 0)?;
    }
    let (mut lambda, coeffs) = rayleigh_ritz(&x, a)?;
    x = combine(&x, &coeffs, bs);
    lambda.truncate(bs);
    let mut p: Option<Block> = None;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        let ax = block_mul(a, &x)?;
        let mx = block_mul(m, &x)?;
        let mut residual_cols: Block = Vec::with_capacity(bs);
        let mut rel = vec![0.0; bs];
        for i in 0..bs {
            let mut r = vec![0.0; n];
            for t in 0..n {
                r[t] = ax[i][t] - lambda[i] * mx[i][t];
            }
            let rn = dot(&r, &r).sqrt();
            let xn = dot(&x[i], &x[i]).sqrt();
            rel[i] = rn / ((norm_a + lambda[i].abs() * norm_m) * xn);
            residual_cols.push(r);
        }
        if rel.iter().take(k).all(|&r| r <= opts.tol) {
            break;
        }
        if it == opts.max_iter {
            return Err(Error::IterationLimit(format!(
                "lobpcg: {} of {} pairs converged after {} iterations (worst relative residual {:.3e})",
                rel.iter().take(k).filter(|&&r| r <= opts.tol).count(),
                k,
                it,
                rel.iter().take(k).fold(0.0f64, |m, &r| m.max(r)),
            )));
        }

        // Soft locking: converged pairs stay in the basis but contribute no
        // new search direction.
        let mut w: Block = Vec::new();
        for i in 0..bs {
            if rel[i] > opts.tol {
                let mut wc = vec![0.0; n];
                for t in 0..n {
                    wc[t] = precond[t] * residual_cols[i][t];
                }
                w.push(wc);
            }
        }
        normalize_columns_m(&mut w, m)?;
        if w.is_empty() {
            break;
        }

        // Assemble the trial basis [X W P] and M-orthonormalize it wholesale;
        // numerically dependent search directions are dropped.
        let mut attempt_drop_p = p.is_some();
        loop {
            let mut basis: Block = Vec::with_capacity(bs + w.len() + bs);
            basis.extend(x.iter().cloned());
            basis.extend(w.iter().cloned());
            if let Some(pb) = &p {
                basis.extend(pb.iter().cloned());
            }
            let ortho = orthonormalize_m(&mut basis, m, bs);
            // No surviving search direction means no possible progress;
            // treat like a breakdown.
            let usable = ortho.is_ok() && basis.len() > bs;
            if usable {
                let (theta, u) = rayleigh_ritz(&basis, a)?;
                let new_x = combine(&basis, &u, bs);
                // Direction part: contribution of the W and P columns.
                let tail: Block = basis[bs..].to_vec();
                let tail_coeffs: Vec<Vec<f64>> = u
                    .iter()
                    .take(bs)
                    .map(|cvec| cvec[bs..].to_vec())
                    .collect();
                let mut new_p = combine(&tail, &tail_coeffs, bs.min(tail.len()));
                normalize_columns_m(&mut new_p, m)?;
                p = match orthonormalize_m(&mut new_p, m, 0) {
                    Ok(()) if !new_p.is_empty() => Some(new_p),
                    _ => None,
                };
                x = new_x;
                lambda = theta[..bs].to_vec();
                break;
            } else if attempt_drop_p {
                p = None;
                attempt_drop_p = false;
            } else if restarts_left > 0 {
                restarts_left -= 1;
                x = random_block(n, bs, &mut rng);
                orthonormalize_m(&mut x, m, 0)?;
                while x.len() < bs {
                    x.extend(random_block(n, bs - x.len(), &mut rng));
                    orthonormalize_m(&mut x, m, 0)?;
                }
                let (l0, c0) = rayleigh_ritz(&x, a)?;
                x = combine(&x, &c0, bs);
                lambda = l0[..bs].to_vec();
                p = None;
                break;
            } else {
                return Err(Error::Factorization(
                    "lobpcg: Gram matrix breakdown persists after restart".into(),
                ));
            }
        }
    }

    let mut residuals = Vec::with_capacity(k);
    for i in 0..k {
        let axi = a.mul_vec(&x[i])?;
        let mxi = m.mul_vec(&x[i])?;
        let r2: f64 = axi
            .iter()
            .zip(&mxi)
            .map(|(&av, &mv)| {
                let r = av - lambda[i] * mv;
                r * r
            })
            .sum();
        residuals.push(r2.sqrt());
    }
    Ok(EigenResult {
        values: lambda[..k].to_vec(),
        vectors: x[..k].to_vec(),
        residuals,
        iterations,
        solver: SolverKind::Lobpcg,
        norm_a,
        norm_m,
        reduced_trace: None,
    })
}

/// Which solver backs a spectrum computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    /// Dense oracle up to [`crate::linalg::DENSE_EIG_CAP`], LOBPCG above.
    Auto,
    Dense,
    Lobpcg,
}

#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    pub solver: SolverChoice,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            solver: SolverChoice::Auto,
            tol: 1e-10,
            max_iter: 3000,
            seed: 0,
        }
    }
}

/// k smallest pairs of the sparse pencil through the selected backend.
pub fn solve_smallest(
    a: &SparseSymMatrix,
    m: &SparseSymMatrix,
    k: usize,
    opts: &EigOptions,
) -> Result<EigenResult> {
    let n = a.order();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {} eigenpairs of an order-{} pencil",
            k, n
        )));
    }
    let use_dense = match opts.solver {
        SolverChoice::Dense => true,
        SolverChoice::Lobpcg => false,
        SolverChoice::Auto => n <= crate::linalg::DENSE_EIG_CAP,
    };
    if use_dense {
        let mut r = crate::linalg::dense_generalized_eig(
            &DenseSymMatrix::from_sparse(a),
            &DenseSymMatrix::from_sparse(m),
        )?;
        r.values.truncate(k);
        r.vectors.truncate(k);
        r.residuals.truncate(k);
        Ok(r)
    } else {
        lobpcg_smallest(
            a,
            m,
            k,
            &LobpcgOptions {
                tol: opts.tol,
                max_iter: opts.max_iter,
                seed: opts.seed,
            },
        )
    }
}

/// (x^T A x) / (x^T M x).
pub fn rayleigh_quotient(a: &SparseSymMatrix, m: &SparseSymMatrix, x: &[f64]) -> Result<f64> {
    let xn = dot(x, x);
    if xn == 0.0 {
        return Err(Error::InvalidArgument(
            "rayleigh quotient of the zero vector".into(),
        ));
    }
    let ax = a.mul_vec(x)?;
    let mx = m.mul_vec(x)?;
    Ok(dot(x, &ax) / dot(x, &mx))
}

/// Solver-independent residual verification of an [`EigenResult`].
#[derive(Debug, Clone)]
pub struct ResidualCheck {
    pub relative: Vec<f64>,
    pub pass: Vec<bool>,
    pub all_pass: bool,
}

pub fn residual_check(
    a: &SparseSymMatrix,
    m: &SparseSymMatrix,
    result: &EigenResult,
    tol: f64,
) -> Result<ResidualCheck> {
    let norm_a = a.frobenius_norm();
    let norm_m = m.frobenius_norm();
    let mut relative = Vec::with_capacity(result.values.len());
    for (i, x) in result.vectors.iter().enumerate() {
        let ax = a.mul_vec(x)?;
        let mx = m.mul_vec(x)?;
        let lam = result.values[i];
        let r2: f64 = ax
            .iter()
            .zip(&mx)
            .map(|(&av, &mv)| {
                let r = av - lam * mv;
                r * r
            })
            .sum();
        let xn = dot(x, x).sqrt();
        relative.push(r2.sqrt() / ((norm_a + lam.abs() * norm_m) * xn));
    }
    let pass: Vec<bool> = relative.iter().map(|&r| r <= tol).collect();
    let all_pass = pass.iter().all(|&p| p);
    Ok(ResidualCheck {
        relative,
        pass,
        all_pass,
    })
}
