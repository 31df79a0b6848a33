//! The projections onto the finite element space (L2 and elliptic), the
//! measured stability/approximation constants, and the projection-based
//! eigenvalue error estimate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assembly::{
    assemble_analytic_inner_products, assemble_mass, assemble_stiffness, p1_gradients,
    CoefficientField,
};
use crate::eigensolver::{solve_smallest, EigOptions};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::{cg_solve, sym_eig, CgOptions, DenseSymMatrix, SparseSymMatrix};
use crate::mesh::{build_mesh, mesh_metrics, BoundaryCondition, DomainSpec, Mesh};
pub use crate::quadrature::QuadratureSpec;
use crate::quadrature::{simplex_rule, SimplexRule};
use crate::report::{FieldValue, RowStatus, VerificationReport};
use crate::spectra::{continuous_spectrum, Eigenfunction};

/// A projection of an analytic function onto the FE space together with the
/// error norms measured by composite quadrature.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Free-DOF coefficients of the projected function.
    pub coefficients: Vec<f64>,
    /// ||(I - P) w||_0
    pub l2_error: f64,
    /// |(I - P) w|_1
    pub h1_semi_error: f64,
    /// |P w|_1
    pub h1_semi_proj: f64,
    /// |w|_1
    pub h1_semi_w: f64,
    /// ||w||_0
    pub l2_w: f64,
    /// ||P w||_0 (exact FE norm via the mass matrix when available)
    pub l2_proj: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    /// L2-orthogonal projection (mass matrix system).
    L2,
    /// Energy-orthogonal projection (stiffness matrix system, Dirichlet).
    Elliptic,
}

/// Error norms of a FE coefficient vector against an analytic function,
/// all in one quadrature sweep.
fn fe_error_norms(
    mesh: &Mesh,
    coeffs: &[f64],
    w: &dyn Field,
    rule: &SimplexRule,
) -> (f64, f64, f64, f64, f64) {
    let d = mesh.dim();
    let dofs = mesh.dof_map();
    let mut l2_err2 = 0.0;
    let mut h1_err2 = 0.0;
    let mut h1_proj2 = 0.0;
    let mut h1_w2 = 0.0;
    let mut l2_w2 = 0.0;
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        let (grads, vol) = p1_gradients(mesh, c);
        let p0 = mesh.vertex_point(cell[0]);
        // constant FE gradient on the cell
        let mut gu = [0.0; 3];
        let mut local = [0.0; 4];
        for (li, &v) in cell.iter().enumerate() {
            let cv = dofs.dof_of_vertex(v).map_or(0.0, |dof| coeffs[dof]);
            local[li] = cv;
            for r in 0..d {
                gu[r] += cv * grads[li][r];
            }
        }
        for &(xi, wq) in &rule.points {
            let weight = wq * vol;
            let mut x = p0;
            for i in 0..d {
                let pi = mesh.vertex(cell[i + 1]);
                for r in 0..d {
                    x[r] += xi[i] * (pi[r] - p0[r]);
                }
            }
            let mut lambda0 = 1.0;
            for i in 0..d {
                lambda0 -= xi[i];
            }
            let mut u = local[0] * lambda0;
            for i in 0..d {
                u += local[i + 1] * xi[i];
            }
            let wv = w.value(&x);
            let gw = w.gradient(&x);
            l2_err2 += weight * (wv - u) * (wv - u);
            l2_w2 += weight * wv * wv;
            let mut ge2 = 0.0;
            let mut gw2 = 0.0;
            let mut gp2 = 0.0;
            for r in 0..d {
                let de = gw[r] - gu[r];
                ge2 += de * de;
                gw2 += gw[r] * gw[r];
                gp2 += gu[r] * gu[r];
            }
            h1_err2 += weight * ge2;
            h1_w2 += weight * gw2;
            h1_proj2 += weight * gp2;
        }
    }
    (l2_err2, h1_err2, h1_proj2, h1_w2, l2_w2)
}

fn projection_cg() -> CgOptions {
    CgOptions {
        tol: 1e-13,
        max_iter: 50_000,
        deflate_constants: false,
        jacobi: true,
    }
}

/// L2 projection: solve M c = (w, phi_i), then measure errors.
pub fn l2_project(
    mesh: &Mesh,
    mass: &SparseSymMatrix,
    w: &dyn Field,
    quad: &QuadratureSpec,
) -> Result<ProjectionResult> {
    let dofs = mesh.dof_map();
    let b = assemble_analytic_inner_products(mesh, w, dofs, quad)?;
    let coeffs = cg_solve(mass, &b, &projection_cg())?.x;
    finish_projection(mesh, mass, coeffs, w, quad)
}

/// Elliptic projection: solve A c = (alpha grad w, grad phi_i). The system
/// must be SPD, i.e. Dirichlet boundary conditions.
pub fn elliptic_project(
    mesh: &Mesh,
    stiffness: &SparseSymMatrix,
    alpha: &CoefficientField,
    w: &dyn Field,
    quad: &QuadratureSpec,
) -> Result<ProjectionResult> {
    if mesh.bc() != BoundaryCondition::Dirichlet {
        return Err(Error::InvalidArgument(
            "elliptic projection requires a Dirichlet (SPD) system".into(),
        ));
    }
    let d = mesh.dim();
    let dofs = mesh.dof_map();
    let rule = simplex_rule(d, quad);
    let mut g = vec![0.0; dofs.n_dofs()];
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        let (grads, vol) = p1_gradients(mesh, c);
        let p0 = mesh.vertex_point(cell[0]);
        for &(xi, wq) in &rule.points {
            let weight = wq * vol;
            let mut x = p0;
            for i in 0..d {
                let pi = mesh.vertex(cell[i + 1]);
                for r in 0..d {
                    x[r] += xi[i] * (pi[r] - p0[r]);
                }
            }
            let a = alpha.evaluate(&x);
            let gw = w.gradient(&x);
            let mut agw = [0.0; 3];
            for r in 0..d {
                for s in 0..d {
                    agw[r] += a[r][s] * gw[s];
                }
            }
            for (li, &v) in cell.iter().enumerate() {
                if let Some(dof) = dofs.dof_of_vertex(v) {
                    let mut dot = 0.0;
                    for r in 0..d {
                        dot += agw[r] * grads[li][r];
                    }
                    g[dof] += weight * dot;
                }
            }
        }
    }
    let coeffs = cg_solve(stiffness, &g, &projection_cg())?.x;
    let mass = assemble_mass(mesh, dofs)?;
    finish_projection(mesh, &mass, coeffs, w, quad)
}

fn finish_projection(
    mesh: &Mesh,
    mass: &SparseSymMatrix,
    coeffs: Vec<f64>,
    w: &dyn Field,
    quad: &QuadratureSpec,
) -> Result<ProjectionResult> {
    let rule = simplex_rule(mesh.dim(), quad);
    let (l2e2, h1e2, h1p2, h1w2, l2w2) = fe_error_norms(mesh, &coeffs, w, &rule);
    let mc = mass.mul_vec(&coeffs)?;
    let l2_proj2: f64 = coeffs.iter().zip(&mc).map(|(&c, &m)| c * m).sum();
    Ok(ProjectionResult {
        coefficients: coeffs,
        l2_error: l2e2.max(0.0).sqrt(),
        h1_semi_error: h1e2.max(0.0).sqrt(),
        h1_semi_proj: h1p2.max(0.0).sqrt(),
        h1_semi_w: h1w2.max(0.0).sqrt(),
        l2_w: l2w2.max(0.0).sqrt(),
        l2_proj: l2_proj2.max(0.0).sqrt(),
    })
}

/// First `k` continuous eigenfunctions of the domain.
pub fn eigenfunction_samples(domain: &DomainSpec, k: usize) -> Result<Vec<Box<dyn Field>>> {
    let spectrum = continuous_spectrum(domain, k)?;
    spectrum
        .entries
        .iter()
        .map(|e| {
            Eigenfunction::new(domain, e.index).map(|phi| Box::new(phi) as Box<dyn Field>)
        })
        .collect()
}

/// Seeded random combinations of the first `pool` eigenfunctions.
pub fn random_trig_samples(
    domain: &DomainSpec,
    count: usize,
    pool: usize,
    seed: u64,
) -> Result<Vec<Box<dyn Field>>> {
    let spectrum = continuous_spectrum(domain, pool)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Box<dyn Field>> = Vec::with_capacity(count);
    for _ in 0..count {
        let terms = 3.min(pool).max(1);
        let mut combo = Vec::with_capacity(terms);
        for _ in 0..terms {
            let idx = rng.gen_range(0..pool);
            let coeff: f64 = rng.sample(StandardNormal);
            let phi = Eigenfunction::new(domain, spectrum.entries[idx].index)?;
            combo.push((coeff, Box::new(phi) as Box<dyn Field>));
        }
        out.push(Box::new(crate::field::LinearCombination { terms: combo }));
    }
    Ok(out)
}

/// Measured constants of one mesh of a family.
#[derive(Debug, Clone, Copy)]
pub struct ConstantsRow {
    pub n: usize,
    pub h: f64,
    /// max |P w|_1 / |w|_1 (the standard H1-stability convention)
    pub c1: f64,
    /// max |P w|_1 / |w|_1^2 (the squared-exponent convention, reported
    /// alongside for comparison)
    pub c1_squared_convention: f64,
    /// max ||(I-P) w||_0^2 / (h^2 |w|_1^2)
    pub c2: f64,
}

#[derive(Debug, Clone)]
pub struct ConstantsEstimate {
    pub rows: Vec<ConstantsRow>,
    pub c1_hat: f64,
    pub c1_sq_hat: f64,
    pub c2_hat: f64,
}

/// Measures the stability and approximation constants of a projector over a
/// family of uniform meshes and a sample set.
pub fn estimate_constants(
    domain: &DomainSpec,
    family: &[usize],
    projector: Projector,
    samples: &[Box<dyn Field>],
    degree: usize,
) -> Result<ConstantsEstimate> {
    if family.is_empty() || samples.is_empty() {
        return Err(Error::InvalidArgument(
            "constants estimation needs at least one mesh and one sample".into(),
        ));
    }
    let d = domain.dim();
    let mut rows = Vec::with_capacity(family.len());
    for &n in family {
        let mesh = build_mesh(domain, &vec![n; d])?;
        let metrics = mesh_metrics(&mesh)?;
        let h = metrics.h;
        let dofs = mesh.dof_map();
        let mass = assemble_mass(&mesh, dofs)?;
        let alpha = CoefficientField::identity();
        let stiffness = match projector {
            Projector::Elliptic => Some(assemble_stiffness(&mesh, &alpha, dofs)?),
            Projector::L2 => None,
        };
        let mut c1 = 0.0f64;
        let mut c1_sq = 0.0f64;
        let mut c2 = 0.0f64;
        for w in samples {
            let quad = QuadratureSpec::for_frequency(w.frequency_hint().max(1.0), h, degree);
            let proj = match projector {
                Projector::L2 => l2_project(&mesh, &mass, w.as_ref(), &quad)?,
                Projector::Elliptic => elliptic_project(
                    &mesh,
                    stiffness.as_ref().expect("stiffness assembled"),
                    &alpha,
                    w.as_ref(),
                    &quad,
                )?,
            };
            if proj.h1_semi_w > 1e-12 {
                c1 = c1.max(proj.h1_semi_proj / proj.h1_semi_w);
                c1_sq = c1_sq.max(proj.h1_semi_proj / (proj.h1_semi_w * proj.h1_semi_w));
                c2 = c2.max(proj.l2_error * proj.l2_error / (h * h * proj.h1_semi_w * proj.h1_semi_w));
            }
        }
        rows.push(ConstantsRow {
            n,
            h,
            c1,
            c1_squared_convention: c1_sq,
            c2,
        });
    }
    let c1_hat = rows.iter().map(|r| r.c1).fold(0.0, f64::max);
    let c1_sq_hat = rows.iter().map(|r| r.c1_squared_convention).fold(0.0, f64::max);
    let c2_hat = rows.iter().map(|r| r.c2).fold(0.0, f64::max);
    Ok(ConstantsEstimate {
        rows,
        c1_hat,
        c1_sq_hat,
        c2_hat,
    })
}

/// Gram matrix G_ij = int grad((I-Q)phi_i) . grad((I-Q)phi_j) for the first
/// `k` eigenfunctions; the supremum of |(I-Q)w|_1 over the unit-L2-norm span
/// is sqrt(lambda_max(G)) because the eigenfunctions are L2-orthonormal.
struct ProjectionGram {
    gram: DenseSymMatrix,
    /// Per-eigenfunction projections for the sample-wise checks.
    projections: Vec<ProjectionResult>,
}

fn projection_gram(
    domain: &DomainSpec,
    mesh: &Mesh,
    mass: &SparseSymMatrix,
    k: usize,
    quad: &QuadratureSpec,
) -> Result<ProjectionGram> {
    let d = mesh.dim();
    let h = mesh_metrics(mesh)?.h;
    let spectrum = continuous_spectrum(domain, k)?;
    let lambda_max = spectrum.entries[k - 1].value;
    if !quad.resolves(lambda_max.sqrt(), h) {
        return Err(Error::Resolution(format!(
            "quadrature with {} subdivisions cannot resolve sqrt(lambda)={} on h={}; need sqrt(lambda)*h/s <= 1",
            quad.subdivisions,
            lambda_max.sqrt(),
            h
        )));
    }
    let mut fields = Vec::with_capacity(k);
    let mut projections = Vec::with_capacity(k);
    for e in &spectrum.entries {
        let phi = Eigenfunction::new(domain, e.index)?;
        let proj = l2_project(mesh, mass, &phi, quad)?;
        fields.push(phi);
        projections.push(proj);
    }
    // Accumulate the k x k Gram of gradient errors in one sweep.
    let rule = simplex_rule(d, quad);
    let dofs = mesh.dof_map();
    let mut gram = DenseSymMatrix::zeros(k);
    let mut acc = vec![0.0; k * k];
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        let (grads, vol) = p1_gradients(mesh, c);
        let p0 = mesh.vertex_point(cell[0]);
        // constant FE gradients of each projection on this cell
        let mut gu = vec![[0.0f64; 3]; k];
        for (li, &v) in cell.iter().enumerate() {
            if let Some(dof) = dofs.dof_of_vertex(v) {
                for (j, proj) in projections.iter().enumerate() {
                    let cv = proj.coefficients[dof];
                    for r in 0..d {
                        gu[j][r] += cv * grads[li][r];
                    }
                }
            }
        }
        let mut ge = vec![[0.0f64; 3]; k];
        for &(xi, wq) in &rule.points {
            let weight = wq * vol;
            let mut x = p0;
            for i in 0..d {
                let pi = mesh.vertex(cell[i + 1]);
                for r in 0..d {
                    x[r] += xi[i] * (pi[r] - p0[r]);
                }
            }
            for (j, phi) in fields.iter().enumerate() {
                let g = phi.gradient(&x);
                for r in 0..d {
                    ge[j][r] = g[r] - gu[j][r];
                }
            }
            for i in 0..k {
                for j in i..k {
                    let mut dot = 0.0;
                    for r in 0..d {
                        dot += ge[i][r] * ge[j][r];
                    }
                    acc[i * k + j] += weight * dot;
                }
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            gram.set_sym(i, j, acc[i * k + j]);
        }
    }
    Ok(ProjectionGram { gram, projections })
}

/// sup over w in the span of the first k eigenfunctions, ||w||_0 = 1, of
/// |(I - Q_h) w|_1, computed exactly through the Gram eigenproblem.
pub fn error_bound_rhs(
    domain: &DomainSpec,
    mesh: &Mesh,
    mass: &SparseSymMatrix,
    k: usize,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let g = projection_gram(domain, mesh, mass, k, quad)?;
    let eig = sym_eig(&g.gram)?;
    Ok(eig.values[k - 1].max(0.0).sqrt())
}

#[derive(Debug, Clone)]
pub struct ErrorEstimateParams {
    pub k_lo: usize,
    pub k_hi: usize,
    /// Measured stability constant (unsquared convention) entering
    /// C = 1 + c1/2.
    pub c1_hat: f64,
    /// Measured approximation constant entering the admissibility condition
    /// lambda_k < 1 / (2 c2 h^2).
    pub c2_hat: f64,
    pub quad: QuadratureSpec,
    pub eig: EigOptions,
}

/// Verifies the eigenvalue error estimate
/// 0 <= sqrt(lambda_hk) - sqrt(lambda_k) <= (1 + c1/2) sup |(I-Q_h)w|_1
/// for every admissible k, along with the projection lower bound
/// ||Q_h w||_0 >= (1 - sqrt(2)/2) ||w||_0 and ||(I-Q_h)w||_0^2 <= 1/2.
pub fn error_estimate_check(
    domain: &DomainSpec,
    mesh: &Mesh,
    params: &ErrorEstimateParams,
) -> Result<VerificationReport> {
    let k_hi = params.k_hi;
    if params.k_lo == 0 || params.k_lo > k_hi {
        return Err(Error::InvalidArgument(format!(
            "bad k range {}..{}",
            params.k_lo, k_hi
        )));
    }
    let dofs = mesh.dof_map();
    let mass = assemble_mass(mesh, dofs)?;
    let stiffness = assemble_stiffness(mesh, &CoefficientField::identity(), dofs)?;
    let h = mesh_metrics(mesh)?.h;
    let spectrum = continuous_spectrum(domain, k_hi)?;
    let discrete = solve_smallest(&stiffness, &mass, k_hi.min(dofs.n_dofs()), &params.eig)?;
    let gram = projection_gram(domain, mesh, &mass, k_hi, &params.quad)?;

    let c_factor = 1.0 + params.c1_hat / 2.0;
    let lower_q_bound = 1.0 - std::f64::consts::SQRT_2 / 2.0;
    let admissible_cap = 1.0 / (2.0 * params.c2_hat * h * h);

    let mut report = VerificationReport::new(
        "error-estimate",
        &["k", "lambda_k", "lambda_hk", "lhs", "rhs", "lower_q", "iqh"],
    );
    report.set_constant("c1_hat", params.c1_hat);
    report.set_constant("c2_hat", params.c2_hat);
    report.set_constant("C", c_factor);
    report.set_constant("h", h);
    report.set_constant("lambda_admissible_below", admissible_cap);
    report.set_constant("lower_q_bound", lower_q_bound);

    for k in params.k_lo..=k_hi {
        let lambda_k = spectrum.entries[k - 1].value;
        if k > discrete.values.len() {
            report.push_row(
                vec![
                    k.into(),
                    lambda_k.into(),
                    FieldValue::Text(String::new()),
                    FieldValue::Text(String::new()),
                    FieldValue::Text(String::new()),
                    FieldValue::Text(String::new()),
                    FieldValue::Text(String::new()),
                ],
                RowStatus::Skipped("k exceeds discrete space dimension".into()),
            );
            continue;
        }
        let lambda_hk = discrete.values[k - 1];
        if !(lambda_k < admissible_cap) {
            report.push_row(
                vec![
                    k.into(),
                    lambda_k.into(),
                    lambda_hk.into(),
                    FieldValue::Text(String::new()),
                    FieldValue::Text(String::new()),
                    FieldValue::Text(String::new()),
                    FieldValue::Text(String::new()),
                ],
                RowStatus::Skipped("condition lambda_k < 1/(2 c2 h^2) not met".into()),
            );
            continue;
        }
        let lhs = lambda_hk.sqrt() - lambda_k.sqrt();
        // exact supremum over W_k through the leading Gram eigenvalue
        let sub = sub_matrix(&gram.gram, k);
        let sup = sym_eig(&sub)?.values[k - 1].max(0.0).sqrt();
        let rhs = c_factor * sup;
        let proj = &gram.projections[k - 1];
        let lower_q = proj.l2_proj / proj.l2_w;
        let iqh = (proj.l2_error / proj.l2_w).powi(2);
        let ok = lhs >= -1e-9 && lhs <= rhs && lower_q >= lower_q_bound - 1e-9 && iqh <= 0.5 + 1e-9;
        report.push_row(
            vec![
                k.into(),
                lambda_k.into(),
                lambda_hk.into(),
                lhs.into(),
                rhs.into(),
                lower_q.into(),
                iqh.into(),
            ],
            if ok { RowStatus::Pass } else { RowStatus::Fail },
        );
    }
    Ok(report)
}

fn sub_matrix(m: &DenseSymMatrix, k: usize) -> DenseSymMatrix {
    let mut s = DenseSymMatrix::zeros(k);
    for i in 0..k {
        for j in i..k {
            s.set_sym(i, j, m.get(i, j));
        }
    }
    s
}
