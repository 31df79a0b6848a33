//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).

use std::f64::consts::PI;

use eigenlab::assembly::{assemble_mass, assemble_stiffness, CoefficientField};
use eigenlab::eigensolver::{lobpcg_smallest, solve_smallest, EigOptions, LobpcgOptions};
use eigenlab::linalg::{dense_generalized_eig, DenseSymMatrix, SparseSymMatrix};
use eigenlab::mesh::{build_mesh, mesh_metrics, BoundaryCondition, DomainSpec, Mesh};
use eigenlab::minmax::{
    intersection_witness, subspace_extremal_rayleigh, verify_courant_fischer, Extremal,
    MinMaxParams, SubspaceBasis,
};
use eigenlab::projection::{
    eigenfunction_samples, error_estimate_check, estimate_constants, random_trig_samples,
    ErrorEstimateParams, Projector, QuadratureSpec,
};
use eigenlab::report::RowStatus;
use eigenlab::spectra::{continuous_spectrum, ratio_extrema, weyl_constant, weyl_ratio_table};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent 1D oracle: the uniform Dirichlet P1 pencil is diagonalized by
/// discrete sine vectors, giving lambda_hk = (6/h^2)(1-cos k pi h)/(2+cos k pi h).
/// Written with the half-angle form of 1 - cos to avoid cancellation.
fn closed_form_1d(n: usize, k: usize) -> f64 {
    let h = 1.0 / n as f64;
    let theta = k as f64 * PI * h;
    (12.0 / (h * h)) * (theta / 2.0).sin().powi(2) / (2.0 + theta.cos())
}

fn pencil(domain: &DomainSpec, n: &[usize], alpha: f64) -> (Mesh, SparseSymMatrix, SparseSymMatrix) {
    let mesh = build_mesh(domain, n).expect("mesh builds");
    let coeff = CoefficientField::scalar(alpha).expect("positive alpha");
    let a = assemble_stiffness(&mesh, &coeff, mesh.dof_map()).expect("stiffness assembles");
    let m = assemble_mass(&mesh, mesh.dof_map()).expect("mass assembles");
    (mesh, a, m)
}

fn dense_values(a: &SparseSymMatrix, m: &SparseSymMatrix) -> Vec<f64> {
    dense_generalized_eig(
        &DenseSymMatrix::from_sparse(a),
        &DenseSymMatrix::from_sparse(m),
    )
    .expect("dense eigensolve")
    .values
}

fn interval(bc: BoundaryCondition) -> DomainSpec {
    DomainSpec::interval(1.0, bc).unwrap()
}

fn unit_square(bc: BoundaryCondition) -> DomainSpec {
    DomainSpec::rectangle([1.0, 1.0], bc).unwrap()
}

fn unit_cube(bc: BoundaryCondition) -> DomainSpec {
    DomainSpec::cuboid([1.0, 1.0, 1.0], bc).unwrap()
}

fn report_line(id: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {} ({}): {}{}",
        id,
        name,
        if pass { "PASS" } else { "FAIL" },
        if detail.is_empty() {
            String::new()
        } else {
            format!(" — {}", detail)
        }
    );
}

#[test]
fn criterion_1_closed_form_oracle_1d() {
    let dom = interval(BoundaryCondition::Dirichlet);
    let mut worst_dense = 0.0f64;
    let mut worst_lobpcg = 0.0f64;
    for n in [16usize, 64, 256] {
        let (_, a, m) = pencil(&dom, &[n], 1.0);
        let values = dense_values(&a, &m);
        assert_eq!(values.len(), n - 1);
        for (i, &v) in values.iter().enumerate() {
            let exact = closed_form_1d(n, i + 1);
            let rel = (v - exact).abs() / exact;
            worst_dense = worst_dense.max(rel);
            assert!(
                rel <= 1e-10,
                "dense path n={} k={}: {} vs {} (rel {})",
                n,
                i + 1,
                v,
                exact,
                rel
            );
        }
        let lob = lobpcg_smallest(
            &a,
            &m,
            10.min(a.order()),
            &LobpcgOptions {
                tol: 1e-10,
                max_iter: 5000,
                seed: 42,
            },
        )
        .expect("lobpcg converges");
        for (i, &v) in lob.values.iter().enumerate() {
            let exact = closed_form_1d(n, i + 1);
            let rel = (v - exact).abs() / exact;
            worst_lobpcg = worst_lobpcg.max(rel);
            assert!(
                rel <= 1e-8,
                "lobpcg n={} k={}: rel {}",
                n,
                i + 1,
                rel
            );
        }
    }
    report_line(
        1,
        "closed-form 1D oracle",
        true,
        &format!(
            "worst dense rel {:.2e}, worst lobpcg rel {:.2e}",
            worst_dense, worst_lobpcg
        ),
    );
}

#[test]
fn criterion_2_two_sided_bound() {
    // 1D family, all k
    let dom1 = interval(BoundaryCondition::Dirichlet);
    let mut cw_1d = Vec::new();
    for n in [16usize, 64, 256] {
        let (_, a, m) = pencil(&dom1, &[n], 1.0);
        let values = dense_values(&a, &m);
        let spectrum = continuous_spectrum(&dom1, values.len()).unwrap();
        let mut cw = 0.0f64;
        for (i, &v) in values.iter().enumerate() {
            let ratio = v / spectrum.entries[i].value;
            assert!(ratio >= 1.0 - 1e-8, "1D n={} k={}: ratio {}", n, i + 1, ratio);
            cw = cw.max(ratio);
        }
        assert!(cw <= 1.5, "1D n={}: C_w {}", n, cw);
        cw_1d.push(cw);
    }
    for pair in cw_1d.windows(2) {
        let drift = (pair[1] - pair[0]).abs() / pair[0];
        assert!(drift <= 0.10, "1D C_w drift {} between refinements", drift);
    }

    // unit square n=32, k <= 20, plus the n=16 -> n=32 refinement drift
    let dom2 = unit_square(BoundaryCondition::Dirichlet);
    let mut cw_sq = Vec::new();
    for n in [16usize, 32] {
        let (_, a, m) = pencil(&dom2, &[n, n], 1.0);
        let discrete = solve_smallest(&a, &m, 20, &EigOptions::default()).unwrap();
        let spectrum = continuous_spectrum(&dom2, 20).unwrap();
        let mut cw = 0.0f64;
        for i in 0..20 {
            let ratio = discrete.values[i] / spectrum.entries[i].value;
            assert!(ratio >= 1.0 - 1e-8, "square n={} k={}: ratio {}", n, i + 1, ratio);
            cw = cw.max(ratio);
        }
        cw_sq.push(cw);
    }
    assert!(cw_sq[1] <= 1.1, "square n=32 C_w {}", cw_sq[1]);
    let sq_drift = (cw_sq[1] - cw_sq[0]).abs() / cw_sq[0];
    assert!(sq_drift <= 0.10, "square C_w drift {}", sq_drift);

    // unit cube n=8, k <= 10
    let dom3 = unit_cube(BoundaryCondition::Dirichlet);
    let (_, a, m) = pencil(&dom3, &[8, 8, 8], 1.0);
    let discrete = solve_smallest(&a, &m, 10, &EigOptions::default()).unwrap();
    let spectrum = continuous_spectrum(&dom3, 10).unwrap();
    let mut cw_cube = 0.0f64;
    for i in 0..10 {
        let ratio = discrete.values[i] / spectrum.entries[i].value;
        assert!(ratio >= 1.0 - 1e-8, "cube k={}: ratio {}", i + 1, ratio);
        cw_cube = cw_cube.max(ratio);
    }
    assert!(cw_cube <= 1.5, "cube n=8 C_w {}", cw_cube);

    report_line(
        2,
        "two-sided eigenvalue bound",
        true,
        &format!(
            "C_w: 1D {:.4}, square {:.4} (drift {:.2}%), cube {:.4}",
            cw_1d[2],
            cw_sq[1],
            100.0 * sq_drift,
            cw_cube
        ),
    );
}

#[test]
fn criterion_3_weyl_law() {
    let mut failures: Vec<String> = Vec::new();
    let mut notes: Vec<String> = Vec::new();

    // interval: ratio is exactly pi^2 for every k
    let dom1 = interval(BoundaryCondition::Dirichlet);
    let s1 = continuous_spectrum(&dom1, 100).unwrap();
    let rows1 = weyl_ratio_table(&s1.values(), 1, false);
    let w1 = weyl_constant(&dom1).w_omega;
    for r in &rows1 {
        if (r.ratio - w1).abs() > 1e-13 * w1 {
            failures.push(format!("interval k={}: ratio {} differs from pi^2", r.k, r.ratio));
            break;
        }
    }
    notes.push("interval ratio = pi^2 exactly".to_string());

    // unit square at k=1000: within 10% of 4 pi
    let dom2 = unit_square(BoundaryCondition::Dirichlet);
    let s2 = continuous_spectrum(&dom2, 1000).unwrap();
    let w2 = weyl_constant(&dom2).w_omega;
    let ratio2 = s2.entries[999].value / 1000f64.powf(1.0);
    let dev2 = (ratio2 - w2).abs() / w2;
    notes.push(format!("square k=1000 deviation {:.3}%", 100.0 * dev2));
    if dev2 > 0.10 {
        failures.push(format!(
            "square k=1000: ratio {} deviates {:.4}% from 4 pi = {}",
            ratio2,
            100.0 * dev2,
            w2
        ));
    }

    // unit cube at k=2000: within 10% of (2 pi)^2 / (4 pi / 3)^(2/3)
    let dom3 = unit_cube(BoundaryCondition::Dirichlet);
    let s3 = continuous_spectrum(&dom3, 2000).unwrap();
    let w3 = weyl_constant(&dom3).w_omega;
    let ratio3 = s3.entries[1999].value / 2000f64.powf(2.0 / 3.0);
    let dev3 = (ratio3 - w3).abs() / w3;
    notes.push(format!("cube k=2000 deviation {:.4}%", 100.0 * dev3));
    if dev3 > 0.10 {
        failures.push(format!(
            "cube k=2000: lambda_2000 = 269 pi^2 = {:.4} gives ratio {:.6}, which deviates {:.4}% \
             from w = {:.6}; the 10% threshold is exceeded by the boundary-correction term \
             (the deviation first drops below 10% near k = 2003)",
            s3.entries[1999].value,
            ratio3,
            100.0 * dev3,
            w3
        ));
    }

    // discrete window on the 1D n=256 mesh
    let (_, a, m) = pencil(&dom1, &[256], 1.0);
    let values = dense_values(&a, &m);
    let rows = weyl_ratio_table(&values, 1, false);
    let (gamma0, gamma1) = ratio_extrema(&rows, 1, values.len()).unwrap();
    notes.push(format!(
        "discrete window gamma0/w = {:.4}, gamma1/w = {:.4}",
        gamma0 / w1,
        gamma1 / w1
    ));
    if gamma0 < 0.9 * w1 {
        failures.push(format!("gamma0 {} below 0.9 w_Omega", gamma0));
    }
    if gamma1 > 1.6 * w1 {
        failures.push(format!("gamma1 {} above 1.6 w_Omega", gamma1));
    }

    let pass = failures.is_empty();
    report_line(3, "Weyl law ratios", pass, &notes.join("; "));
    assert!(
        pass,
        "criterion 3 failed:\n  {}",
        failures.join("\n  ")
    );
}

#[test]
fn criterion_4_inverse_inequality() {
    // 1D: product in [10, 12.001], increasing toward 12
    let dom1 = interval(BoundaryCondition::Dirichlet);
    let mut products = Vec::new();
    for n in [16usize, 32, 64] {
        let (mesh, a, m) = pencil(&dom1, &[n], 1.0);
        let h = mesh_metrics(&mesh).unwrap().h;
        let values = dense_values(&a, &m);
        let product = values.last().unwrap() * h * h;
        assert!(
            (10.0..=12.001).contains(&product),
            "1D n={}: product {}",
            n,
            product
        );
        products.push(product);
    }
    assert!(
        products.windows(2).all(|p| p[1] > p[0]),
        "1D products should increase toward 12: {:?}",
        products
    );

    // square: spread below a factor of 2 across n in {8, 16, 32}
    let dom2 = unit_square(BoundaryCondition::Dirichlet);
    let mut sq_products = Vec::new();
    for n in [8usize, 16, 32] {
        let (mesh, a, m) = pencil(&dom2, &[n, n], 1.0);
        let h = mesh_metrics(&mesh).unwrap().h;
        let values = dense_values(&a, &m);
        sq_products.push(values.last().unwrap() * h * h);
    }
    let pmin = sq_products.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmax = sq_products.iter().cloned().fold(0.0f64, f64::max);
    assert!(pmax / pmin < 2.0, "square spread {}", pmax / pmin);

    report_line(
        4,
        "inverse inequality",
        true,
        &format!(
            "1D products {:?}, square spread {:.4}",
            products
                .iter()
                .map(|p| (p * 1e4).round() / 1e4)
                .collect::<Vec<_>>(),
            pmax / pmin
        ),
    );
}

#[test]
fn criterion_5_minmax_suite() {
    // random symmetric 50x50, 200 trials per k in {1, 5, 25, 50}
    let n = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut a = DenseSymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            a.set_sym(i, j, rng.sample::<f64, _>(StandardNormal));
        }
    }
    let params = MinMaxParams {
        ks: vec![1, 5, 25, 50],
        trials: 200,
        seed: 7,
    };
    let report = verify_courant_fischer(&a, &params).unwrap();
    assert!(report.overall_pass(), "min-max suite reported failures");
    for row in &report.rows {
        assert!(
            matches!(row.status, RowStatus::Pass),
            "row failed: {:?}",
            row
        );
    }
    // equality attainment is also checked directly through the restriction
    let eig = eigenlab::linalg::sym_eig(&a).unwrap();
    let range = eig.values[n - 1] - eig.values[0];
    for &k in &[1usize, 5, 25, 50] {
        let lead = SubspaceBasis::from_columns(n, eig.vectors[..k].to_vec()).unwrap();
        let max_lead = subspace_extremal_rayleigh(&a, &lead, Extremal::Max).unwrap();
        assert!(
            (max_lead - eig.values[k - 1]).abs() <= 1e-9 * range,
            "eigenvector span misses equality at k={}",
            k
        );
    }

    // intersection witness: 100 random (n=40, k=7) instances
    let (wn, wk) = (40usize, 7usize);
    let tail = SubspaceBasis::coordinate(wn, &(wk - 1..wn).collect::<Vec<_>>()).unwrap();
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        let mut wrng = ChaCha8Rng::seed_from_u64(31_000 + t);
        let w = SubspaceBasis::random(wn, wk, &mut wrng).unwrap();
        let psi = intersection_witness(wn, wk, &w, t).unwrap();
        let res = w.distance(&psi).max(tail.distance(&psi));
        worst = worst.max(res);
        assert!(res <= 1e-8, "witness trial {}: residual {}", t, res);
    }
    report_line(
        5,
        "min-max and intersection lemma",
        true,
        &format!("0 violations; worst witness residual {:.2e}", worst),
    );
}

#[test]
fn criterion_6_error_estimate() {
    // interval n=64
    let dom1 = interval(BoundaryCondition::Dirichlet);
    let mesh1 = build_mesh(&dom1, &[64]).unwrap();
    let mut samples1 = eigenfunction_samples(&dom1, 96).unwrap();
    samples1.extend(random_trig_samples(&dom1, 4, 24, 11).unwrap());
    let est1 = estimate_constants(&dom1, &[32, 64], Projector::L2, &samples1, 4).unwrap();
    let params1 = ErrorEstimateParams {
        k_lo: 1,
        k_hi: 8,
        c1_hat: est1.c1_hat,
        c2_hat: est1.c2_hat,
        quad: QuadratureSpec::new(6, 1).unwrap(),
        eig: EigOptions::default(),
    };
    let report1 = error_estimate_check(&dom1, &mesh1, &params1).unwrap();
    let checked1 = report1
        .rows
        .iter()
        .filter(|r| matches!(r.status, RowStatus::Pass))
        .count();
    assert!(report1.overall_pass(), "interval error estimate failed");
    assert!(checked1 >= 5, "too few admissible k on the interval");

    // unit square n=32
    let dom2 = unit_square(BoundaryCondition::Dirichlet);
    let mesh2 = build_mesh(&dom2, &[32, 32]).unwrap();
    let mut samples2 = eigenfunction_samples(&dom2, 16).unwrap();
    samples2.extend(random_trig_samples(&dom2, 4, 16, 13).unwrap());
    let est2 = estimate_constants(&dom2, &[16, 32], Projector::L2, &samples2, 4).unwrap();
    let params2 = ErrorEstimateParams {
        k_lo: 1,
        k_hi: 5,
        c1_hat: est2.c1_hat,
        c2_hat: est2.c2_hat,
        quad: QuadratureSpec::new(4, 1).unwrap(),
        eig: EigOptions::default(),
    };
    let report2 = error_estimate_check(&dom2, &mesh2, &params2).unwrap();
    assert!(report2.overall_pass(), "square error estimate failed");
    let checked2 = report2
        .rows
        .iter()
        .filter(|r| matches!(r.status, RowStatus::Pass))
        .count();
    assert!(checked2 >= 3, "too few admissible k on the square");

    report_line(
        6,
        "projection error estimate",
        true,
        &format!(
            "interval: {} admissible k pass (c1 {:.3}, c2 {:.4}); square: {} pass (c1 {:.3}, c2 {:.4})",
            checked1, est1.c1_hat, est1.c2_hat, checked2, est2.c1_hat, est2.c2_hat
        ),
    );
}

#[test]
fn criterion_7_spectral_structure() {
    // Dirichlet: sign-definite first eigenvector on every test mesh
    let cases: Vec<(DomainSpec, Vec<usize>)> = vec![
        (interval(BoundaryCondition::Dirichlet), vec![64]),
        (unit_square(BoundaryCondition::Dirichlet), vec![32, 32]),
        (unit_cube(BoundaryCondition::Dirichlet), vec![8, 8, 8]),
    ];
    for (dom, n) in &cases {
        let (_, a, m) = pencil(dom, n, 1.0);
        let result = solve_smallest(&a, &m, 2, &EigOptions::default()).unwrap();
        let x1 = &result.vectors[0];
        let sign = x1[0].signum();
        assert!(
            x1.iter().all(|&v| v * sign > 0.0),
            "first eigenvector changes sign on {:?}",
            n
        );
    }

    // Neumann: lambda_h1 <= 1e-10 lambda_h2 with a constant eigenvector
    let neumann_cases: Vec<(DomainSpec, Vec<usize>)> = vec![
        (interval(BoundaryCondition::Neumann), vec![32]),
        (unit_square(BoundaryCondition::Neumann), vec![8, 8]),
        (unit_cube(BoundaryCondition::Neumann), vec![4, 4, 4]),
    ];
    for (dom, n) in &neumann_cases {
        let (_, a, m) = pencil(dom, n, 1.0);
        let result = solve_smallest(&a, &m, 2, &EigOptions::default()).unwrap();
        assert!(
            result.values[0].abs() <= 1e-10 * result.values[1],
            "Neumann zero mode too large on {:?}: {} vs {}",
            n,
            result.values[0],
            result.values[1]
        );
        let x1 = &result.vectors[0];
        let mean = x1.iter().sum::<f64>() / x1.len() as f64;
        for &v in x1 {
            assert!(
                (v - mean).abs() <= 1e-8 * mean.abs(),
                "Neumann first eigenvector not constant on {:?}",
                n
            );
        }
    }
    report_line(7, "spectral structure", true, "");
}

#[test]
fn criterion_8_scaling_laws() {
    // alpha -> c alpha multiplies every eigenvalue by exactly c
    let c = 4.0;
    for (dom, n) in [
        (interval(BoundaryCondition::Dirichlet), vec![64usize]),
        (unit_square(BoundaryCondition::Dirichlet), vec![16, 16]),
    ] {
        let (_, a1, m1) = pencil(&dom, &n, 1.0);
        let (_, ac, mc) = pencil(&dom, &n, c);
        let v1 = dense_values(&a1, &m1);
        let vc = dense_values(&ac, &mc);
        for (x, y) in v1.iter().zip(&vc) {
            assert!(
                (y / (c * x) - 1.0).abs() <= 1e-12,
                "coefficient scaling violated: {} vs {}",
                y,
                c * x
            );
        }
        let _ = m1;
        let _ = mc;
    }

    // domain dilation by s=2 divides every eigenvalue by s^2 = 4
    let s = 2.0;
    for (dom_kind, n) in [(1usize, vec![64usize]), (2, vec![16, 16])] {
        let (dom_a, dom_b) = match dom_kind {
            1 => (
                interval(BoundaryCondition::Dirichlet),
                DomainSpec::interval(s, BoundaryCondition::Dirichlet).unwrap(),
            ),
            _ => (
                unit_square(BoundaryCondition::Dirichlet),
                DomainSpec::rectangle([s, s], BoundaryCondition::Dirichlet).unwrap(),
            ),
        };
        let (_, a1, m1) = pencil(&dom_a, &n, 1.0);
        let (_, a2, m2) = pencil(&dom_b, &n, 1.0);
        let v1 = dense_values(&a1, &m1);
        let v2 = dense_values(&a2, &m2);
        for (x, y) in v1.iter().zip(&v2) {
            assert!(
                (x / (y * s * s) - 1.0).abs() <= 1e-10,
                "dilation scaling violated: {} vs {}",
                x,
                y * s * s
            );
        }
    }
    report_line(8, "scaling laws", true, "");
}

#[test]
fn criterion_9_deterministic_reports() {
    // Byte-identical CSV from repeated runs with a fixed seed, exercised
    // through the installed binary exactly as a user would.
    let bin = env!("CARGO_BIN_EXE_eigenlab");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{}.csv", run));
        let status = std::process::Command::new(bin)
            .args([
                "minmax-test",
                "--n",
                "30",
                "--trials",
                "40",
                "--seed",
                "7",
                "--witness-trials",
                "20",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .expect("binary runs");
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "CSV outputs differ between runs");

    // and for a randomized eigensolver command
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("eigs{}.csv", run));
        let status = std::process::Command::new(bin)
            .args([
                "eigs",
                "--domain",
                "interval",
                "--n",
                "128",
                "--k",
                "5",
                "--solver",
                "lobpcg",
                "--tol",
                "1e-9",
                "--seed",
                "3",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .expect("binary runs");
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "lobpcg CSV outputs differ");
    report_line(9, "deterministic reports", true, "");
}
