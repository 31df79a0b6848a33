//! Finite-dimensional verification of the min-max principles and the
//! subspace-intersection argument behind them.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, DenseSymMatrix};
use crate::report::{RowStatus, VerificationReport};

/// Orthonormal basis of a k-dimensional subspace of R^n.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    n: usize,
    cols: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

impl SubspaceBasis {
    /// Orthonormalizes the given spanning vectors by modified Gram-Schmidt
    /// with one re-orthogonalization pass; rank deficiency is an error.
    pub fn from_columns(n: usize, cols: Vec<Vec<f64>>) -> Result<Self> {
        if cols.is_empty() || cols.len() > n {
            return Err(Error::InvalidArgument(format!(
                "subspace dimension {} invalid for ambient dimension {}",
                cols.len(),
                n
            )));
        }
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
        for mut c in cols {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column length {} vs ambient {}",
                    c.len(),
                    n
                )));
            }
            let orig_norm = dot(&c, &c).sqrt();
            for _ in 0..2 {
                for prev in &q {
                    let proj = dot(&c, prev);
                    for (ci, pi) in c.iter_mut().zip(prev) {
                        *ci -= proj * pi;
                    }
                }
            }
            let norm = dot(&c, &c).sqrt();
            if norm <= 1e-12 * orig_norm.max(1.0) {
                return Err(Error::InvalidArgument(
                    "rank-deficient spanning set".into(),
                ));
            }
            for ci in c.iter_mut() {
                *ci /= norm;
            }
            q.push(c);
        }
        Ok(Self { n, cols: q })
    }

    /// Random k-dimensional subspace from seeded standard normal vectors
    /// (rotation-invariant, hence unbiased over the Grassmannian).
    pub fn random(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Self::from_columns(n, cols)
    }

    /// Span of the listed coordinate axes.
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Self> {
        let cols = axes
            .iter()
            .map(|&a| {
                let mut e = vec![0.0; n];
                e[a] = 1.0;
                e
            })
            .collect();
        Self::from_columns(n, cols)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.cols
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_identity_error(&self) -> f64 {
        let k = self.cols.len();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in i..k {
                let g = dot(&self.cols[i], &self.cols[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Euclidean distance from a unit vector to the subspace.
    pub fn distance(&self, v: &[f64]) -> f64 {
        let mut residual = v.to_vec();
        for col in &self.cols {
            let proj = dot(&residual, col);
            for (r, c) in residual.iter_mut().zip(col) {
                *r -= proj * c;
            }
        }
        dot(&residual, &residual).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremal {
    Min,
    Max,
}

/// Extremal Rayleigh quotient of A over a subspace: the extremal eigenvalue
/// of the exact restriction W^T A W.
pub fn subspace_extremal_rayleigh(
    a: &DenseSymMatrix,
    w: &SubspaceBasis,
    which: Extremal,
) -> Result<f64> {
    if w.ambient_dim() != a.order() {
        return Err(Error::DimensionMismatch(format!(
            "subspace ambient {} vs matrix order {}",
            w.ambient_dim(),
            a.order()
        )));
    }
    if w.gram_identity_error() > 1e-10 {
        return Err(Error::InvalidArgument(
            "subspace basis is not orthonormal".into(),
        ));
    }
    let k = w.dim();
    let mut restricted = DenseSymMatrix::zeros(k);
    let aw: Vec<Vec<f64>> = w.columns().iter().map(|c| a.mul_vec(c)).collect();
    for i in 0..k {
        for j in i..k {
            restricted.set_sym(i, j, dot(&w.columns()[i], &aw[j]));
        }
    }
    let eig = sym_eig(&restricted)?;
    Ok(match which {
        Extremal::Min => eig.values[0],
        Extremal::Max => eig.values[k - 1],
    })
}

#[derive(Debug, Clone)]
pub struct MinMaxParams {
    /// Indices k to test (1-based).
    pub ks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

/// Randomized verification of both characterizations of the k-th eigenvalue:
/// over random k-dimensional subspaces the max Rayleigh quotient stays above
/// lambda_k, over random (n-k+1)-dimensional subspaces the min stays below,
/// and the eigenvector spans attain equality.
pub fn verify_courant_fischer(
    a: &DenseSymMatrix,
    params: &MinMaxParams,
) -> Result<VerificationReport> {
    let n = a.order();
    let eig = sym_eig(a)?;
    let range = eig.values[n - 1] - eig.values[0];
    let abs_scale = eig.values[n - 1].abs().max(eig.values[0].abs());
    let tol = 1e-9 * range + 1e-13 * abs_scale.max(1.0);

    let mut report = VerificationReport::new(
        "minmax",
        &["check", "k", "trials", "violations", "worst_violation"],
    );
    report.set_constant("n", n as f64);
    report.set_constant("spectral_range", range);
    report.set_constant("tolerance", tol);

    for (ki, &k) in params.ks.iter().enumerate() {
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "k={} out of range for order {}",
                k, n
            )));
        }
        let lambda_k = eig.values[k - 1];
        // random k-dimensional subspaces: max over W >= lambda_k
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for t in 0..params.trials {
            let trial_seed = params.seed + (ki * params.trials + t) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let w = SubspaceBasis::random(n, k, &mut rng)?;
            let maxr = subspace_extremal_rayleigh(a, &w, Extremal::Max)?;
            let gap = lambda_k - maxr;
            if gap > tol {
                violations += 1;
            }
            worst = worst.max(gap);
        }
        report.push_row(
            vec![
                "min_over_k_dim_max_rayleigh".into(),
                k.into(),
                params.trials.into(),
                violations.into(),
                worst.into(),
            ],
            if violations == 0 {
                RowStatus::Pass
            } else {
                RowStatus::Fail
            },
        );

        // random (n-k+1)-dimensional subspaces: min over W <= lambda_k
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for t in 0..params.trials {
            let trial_seed = params.seed + ((ki + params.ks.len()) * params.trials + t) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let w = SubspaceBasis::random(n, n - k + 1, &mut rng)?;
            let minr = subspace_extremal_rayleigh(a, &w, Extremal::Min)?;
            let gap = minr - lambda_k;
            if gap > tol {
                violations += 1;
            }
            worst = worst.max(gap);
        }
        report.push_row(
            vec![
                "max_over_codim_min_rayleigh".into(),
                k.into(),
                params.trials.into(),
                violations.into(),
                worst.into(),
            ],
            if violations == 0 {
                RowStatus::Pass
            } else {
                RowStatus::Fail
            },
        );

        // eigenvector spans attain equality in both characterizations
        let lead = SubspaceBasis::from_columns(n, eig.vectors[..k].to_vec())?;
        let max_lead = subspace_extremal_rayleigh(a, &lead, Extremal::Max)?;
        let tail = SubspaceBasis::from_columns(n, eig.vectors[k - 1..].to_vec())?;
        let min_tail = subspace_extremal_rayleigh(a, &tail, Extremal::Min)?;
        let err = (max_lead - lambda_k).abs().max((min_tail - lambda_k).abs());
        report.push_row(
            vec![
                "eigenvector_span_attains".into(),
                k.into(),
                1usize.into(),
                usize::from(err > tol).into(),
                err.into(),
            ],
            if err <= tol {
                RowStatus::Pass
            } else {
                RowStatus::Fail
            },
        );
    }
    Ok(report)
}

/// A nonzero unit vector lying (to tolerance) in both a given k-dimensional
/// subspace W and the trailing coordinate span {e_k, ..., e_n}. Existence is
/// forced by dim W + dim span = n + 1 > n; the witness is the least
/// eigenvector of the sum of the two complementary projectors.
pub fn intersection_witness(
    n: usize,
    k: usize,
    w: &SubspaceBasis,
    seed: u64,
) -> Result<Vec<f64>> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k={} out of range for ambient dimension {}",
            k, n
        )));
    }
    if w.ambient_dim() != n || w.dim() != k {
        return Err(Error::DimensionMismatch(format!(
            "expected a {}-dimensional subspace of R^{}",
            k, n
        )));
    }
    let tail = SubspaceBasis::coordinate(n, &(k - 1..n).collect::<Vec<_>>())?;
    let witness = smallest_combined_direction(n, w, &tail)?;
    let (dw, dt) = (w.distance(&witness), tail.distance(&witness));
    if dw <= 1e-8 && dt <= 1e-8 {
        return Ok(witness);
    }
    // The eigenproblem should always succeed; as a deterministic fallback,
    // re-mix the basis of W with a seeded rotation and retry once.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mixed: Vec<Vec<f64>> = {
        let k = w.dim();
        let coeffs: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        (0..k)
            .map(|j| {
                let mut col = vec![0.0; n];
                for (i, c) in w.columns().iter().enumerate() {
                    for (o, &v) in col.iter_mut().zip(c) {
                        *o += coeffs[j][i] * v;
                    }
                }
                col
            })
            .collect()
    };
    let w2 = SubspaceBasis::from_columns(n, mixed)?;
    let witness = smallest_combined_direction(n, &w2, &tail)?;
    let (dw, dt) = (w2.distance(&witness), tail.distance(&witness));
    if dw <= 1e-8 && dt <= 1e-8 {
        Ok(witness)
    } else {
        Err(Error::IterationLimit(format!(
            "witness residuals {} / {} exceed 1e-8",
            dw, dt
        )))
    }
}

fn smallest_combined_direction(
    n: usize,
    w: &SubspaceBasis,
    tail: &SubspaceBasis,
) -> Result<Vec<f64>> {
    // S = (I - P_W) + (I - P_tail) is PSD; its null space is the intersection.
    let mut s = DenseSymMatrix::zeros(n);
    for i in 0..n {
        s.set_sym(i, i, 2.0);
    }
    for basis in [w, tail] {
        for col in basis.columns() {
            for i in 0..n {
                if col[i] == 0.0 {
                    continue;
                }
                for j in i..n {
                    let v = s.get(i, j) - col[i] * col[j];
                    s.set_sym(i, j, v);
                }
            }
        }
    }
    let eig = sym_eig(&s)?;
    let mut v = eig.vectors[0].clone();
    let norm = dot(&v, &v).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(n: usize, seed: u64) -> DenseSymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DenseSymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set_sym(i, j, rng.sample::<f64, _>(StandardNormal));
            }
        }
        m
    }

    #[test]
    fn diagonal_restriction_is_exact() {
        let a = DenseSymMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let w = SubspaceBasis::coordinate(3, &[0, 1]).unwrap();
        let max = subspace_extremal_rayleigh(&a, &w, Extremal::Max).unwrap();
        assert!((max - 2.0).abs() < 1e-14);
        let full = SubspaceBasis::coordinate(3, &[0, 1, 2]).unwrap();
        assert!(
            (subspace_extremal_rayleigh(&a, &full, Extremal::Max).unwrap() - 3.0).abs() < 1e-14
        );
        assert!(
            (subspace_extremal_rayleigh(&a, &full, Extremal::Min).unwrap() - 1.0).abs() < 1e-14
        );
    }

    #[test]
    fn random_subspace_dominates_lambda_k() {
        let a = random_sym(20, 3);
        let eig = sym_eig(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in [1usize, 5, 12, 20] {
            let w = SubspaceBasis::random(20, k, &mut rng).unwrap();
            let maxr = subspace_extremal_rayleigh(&a, &w, Extremal::Max).unwrap();
            assert!(maxr >= eig.values[k - 1] - 1e-10);
        }
    }

    #[test]
    fn line_search_never_exceeds_subspace_extremal() {
        let a = random_sym(15, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = SubspaceBasis::random(15, 4, &mut rng).unwrap();
        let maxr = subspace_extremal_rayleigh(&a, &w, Extremal::Max).unwrap();
        let minr = subspace_extremal_rayleigh(&a, &w, Extremal::Min).unwrap();
        for _ in 0..200 {
            // random direction inside W
            let mut v = vec![0.0; 15];
            for col in w.columns() {
                let c: f64 = rng.sample(StandardNormal);
                for (vi, &ci) in v.iter_mut().zip(col) {
                    *vi += c * ci;
                }
            }
            let av = a.mul_vec(&v);
            let rq = dot(&v, &av) / dot(&v, &v);
            assert!(rq <= maxr + 1e-10);
            assert!(rq >= minr - 1e-10);
        }
    }

    #[test]
    fn courant_fischer_suite_passes() {
        let a = random_sym(30, 17);
        let params = MinMaxParams {
            ks: vec![1, 7, 15, 30],
            trials: 50,
            seed: 5,
        };
        let report = verify_courant_fischer(&a, &params).unwrap();
        assert!(report.overall_pass());
        assert_eq!(report.rows.len(), 12);
    }

    #[test]
    fn identity_matrix_gives_exactly_one() {
        let a = DenseSymMatrix::identity(12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in [1usize, 4, 12] {
            let w = SubspaceBasis::random(12, k, &mut rng).unwrap();
            let maxr = subspace_extremal_rayleigh(&a, &w, Extremal::Max).unwrap();
            let minr = subspace_extremal_rayleigh(&a, &w, Extremal::Min).unwrap();
            assert!((maxr - 1.0).abs() < 1e-12);
            assert!((minr - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_covariance() {
        let a = random_sym(18, 23);
        let c = 3.75;
        let mut shifted = a.clone();
        for i in 0..18 {
            shifted.set_sym(i, i, a.get(i, i) + c);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let w = SubspaceBasis::random(18, 5, &mut rng).unwrap();
            let m1 = subspace_extremal_rayleigh(&a, &w, Extremal::Max).unwrap();
            let m2 = subspace_extremal_rayleigh(&shifted, &w, Extremal::Max).unwrap();
            assert!((m2 - m1 - c).abs() < 1e-11);
        }
    }

    #[test]
    fn witness_for_coordinate_subspace() {
        // W = span{e1, e2} in R^3, k=2: the intersection with span{e2, e3}
        // is the e2 axis.
        let w = SubspaceBasis::coordinate(3, &[0, 1]).unwrap();
        let psi = intersection_witness(3, 2, &w, 0).unwrap();
        assert!((psi[1].abs() - 1.0).abs() < 1e-9);
        assert!(psi[0].abs() < 1e-9 && psi[2].abs() < 1e-9);
    }

    #[test]
    fn witness_when_w_inside_tail_span() {
        // W = span{e_k, ..., e_{2k-1}} is inside the trailing span; any unit
        // vector of W qualifies.
        let (n, k) = (12usize, 4usize);
        let w = SubspaceBasis::coordinate(n, &(k - 1..2 * k - 1).collect::<Vec<_>>()).unwrap();
        let psi = intersection_witness(n, k, &w, 1).unwrap();
        assert!(w.distance(&psi) <= 1e-8);
    }

    #[test]
    fn witness_for_random_subspaces() {
        let (n, k) = (40usize, 7usize);
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let w = SubspaceBasis::random(n, k, &mut rng).unwrap();
            let psi = intersection_witness(n, k, &w, seed).unwrap();
            let tail = SubspaceBasis::coordinate(n, &(k - 1..n).collect::<Vec<_>>()).unwrap();
            assert!(w.distance(&psi) <= 1e-8, "seed {}", seed);
            assert!(tail.distance(&psi) <= 1e-8, "seed {}", seed);
            let norm: f64 = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_basis_rejected() {
        let col = vec![1.0, 0.0, 0.0];
        assert!(SubspaceBasis::from_columns(3, vec![col.clone(), col]).is_err());
    }

    #[test]
    fn random_bases_are_orthonormal_to_spec_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for k in [1usize, 8, 25, 50] {
            let w = SubspaceBasis::random(50, k, &mut rng).unwrap();
            assert!(
                w.gram_identity_error() <= 1e-12,
                "k={}: gram error {}",
                k,
                w.gram_identity_error()
            );
        }
    }
}
