//! Command-line driver: wires meshes, assembly, eigensolvers, spectra,
//! projections and min-max checks into verification commands that emit
//! CSV/JSON reports with CI-friendly exit codes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assembly::{assemble_mass, assemble_stiffness, CoefficientField};
use crate::eigensolver::{residual_check, solve_smallest, EigOptions, SolverChoice};
use crate::error::{Error, Result};
use crate::linalg::DenseSymMatrix;
use crate::mesh::{build_mesh, mesh_metrics, BoundaryCondition, DomainKind, DomainSpec, Mesh};
use crate::minmax::{intersection_witness, verify_courant_fischer, MinMaxParams, SubspaceBasis};
use crate::projection::{
    error_estimate_check, estimate_constants, eigenfunction_samples, random_trig_samples,
    ErrorEstimateParams, Projector, QuadratureSpec,
};
use crate::report::{ReportFormat, RowStatus, VerificationReport};
use crate::spectra::{continuous_spectrum, ratio_extrema, weyl_constant, weyl_ratio_table};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Interval,
    Square,
    Rect,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BcArg {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Dense,
    Lobpcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProjectorArg {
    Qh,
    Ph,
}

/// Options shared by every command; any of them may also come from a
/// `--config` file with `key = value` lines (flags win).
#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// Model domain
    #[arg(long, global = true, value_enum)]
    pub domain: Option<DomainArg>,
    /// Side lengths `a[,b[,c]]`
    #[arg(long, global = true)]
    pub lengths: Option<String>,
    /// Per-axis subdivisions `n[,n[,n]]`; a single value broadcasts to all
    /// axes. The `constants` command reads this as a mesh family instead.
    #[arg(long, global = true)]
    pub n: Option<String>,
    /// Boundary condition
    #[arg(long, global = true, value_enum)]
    pub bc: Option<BcArg>,
    /// Eigenvalue index range: `k` (meaning 1..k) or `a..b`
    #[arg(long, global = true)]
    pub k: Option<String>,
    /// Eigensolver backend (default: dense up to order 2000, LOBPCG above)
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverArg>,
    /// Relative residual tolerance for iterative solves
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Iteration cap for iterative solves
    #[arg(long, global = true)]
    pub maxiter: Option<usize>,
    /// RNG seed for every randomized component
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Base quadrature polynomial degree
    #[arg(long = "quad-degree", global = true)]
    pub quad_degree: Option<usize>,
    /// Composite quadrature subdivisions per element (default: matched to
    /// the highest integrand frequency)
    #[arg(long = "quad-subdiv", global = true)]
    pub quad_subdiv: Option<usize>,
    /// Scalar coefficient c in alpha = c I
    #[arg(long = "alpha-scalar", global = true)]
    pub alpha_scalar: Option<f64>,
    /// Output path (stdout when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Plain-text config file with `key = value` lines and `#` comments
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Mesh structure report: sizes, metrics and conformity checks.
    ///
    /// CSV columns: dim, vertices, cells, boundary_vertices, free_dofs, h,
    /// quasi_uniformity, volume_sum, volume_exact, status.
    MeshInfo {
        /// Write a plain-text mesh dump (VERTICES/CELLS/BOUNDARY sections)
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Smallest eigenpairs of the assembled pencil.
    ///
    /// CSV columns: k, lambda_hk, residual, status.
    Eigs {
        /// Write the stiffness matrix in `row col value` text form
        #[arg(long = "dump-stiffness")]
        dump_stiffness: Option<PathBuf>,
        /// Write the mass matrix in `row col value` text form
        #[arg(long = "dump-mass")]
        dump_mass: Option<PathBuf>,
    },
    /// Two-sided bound of discrete by continuous eigenvalues.
    ///
    /// CSV columns: level, k, lambda_k, lambda_hk, ratio, status. For the
    /// Neumann zero mode (k=1) `ratio` is lambda_h1 / lambda_h2 and the row
    /// passes when it is below 1e-10.
    BoundCheck {
        /// Number of refinement levels n, 2n, 4n, ... (default 1)
        #[arg(long)]
        refine: Option<usize>,
    },
    /// Weyl-law ratio tables, continuous and discrete.
    ///
    /// CSV columns: series, k, lambda, ratio, status. Summary rows with
    /// series gamma0/gamma1 carry the measured window extrema.
    WeylCheck {
        /// Acceptance margin: require gamma0 <= w_Omega (1 + delta)
        #[arg(long, allow_negative_numbers = true)]
        delta: Option<f64>,
        /// Ratio window `lo..hi` (default: the full k range)
        #[arg(long)]
        window: Option<String>,
    },
    /// Largest discrete eigenvalue against the inverse-inequality scaling.
    ///
    /// CSV columns: level, h, dofs, lambda_max, product, status. The final
    /// `spread` row passes when max/min of the product stays below 2.
    InverseCheck {
        /// Number of refinement levels (default 3)
        #[arg(long)]
        refine: Option<usize>,
    },
    /// Min-max principle trials on a random symmetric matrix plus the
    /// subspace-intersection witness construction.
    ///
    /// CSV columns: check, k, trials, violations, worst_violation, status.
    MinmaxTest {
        /// Subspace trials per index (default 200)
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated list of indices k to test (default 1,5,n/2,n)
        #[arg(long)]
        ks: Option<String>,
        /// Ambient dimension for the witness construction (default 40)
        #[arg(long = "witness-n")]
        witness_n: Option<usize>,
        /// Subspace dimension for the witness construction (default 7)
        #[arg(long = "witness-k")]
        witness_k: Option<usize>,
        /// Number of witness instances (default 100)
        #[arg(long = "witness-trials")]
        witness_trials: Option<usize>,
    },
    /// Eigenvalue error estimate through the L2-projection bound.
    ///
    /// CSV columns: k, lambda_k, lambda_hk, lhs, rhs, lower_q, iqh, status.
    ErrorEstimate {
        /// Stability constant c1 (measured on a mesh family when omitted)
        #[arg(long)]
        c1: Option<f64>,
        /// Approximation constant c2 (measured when omitted)
        #[arg(long)]
        c2: Option<f64>,
    },
    /// Measured projection stability/approximation constants over a mesh
    /// family; `--n` lists the family (uniform subdivisions per mesh).
    ///
    /// CSV columns: n, h, c1, c1_squared_convention, c2, status. The final
    /// `drift` row passes when both constants drift less than --drift-max.
    Constants {
        /// Projector: qh (L2) or ph (elliptic)
        #[arg(long, value_enum)]
        projector: Option<ProjectorArg>,
        /// Largest tolerated relative drift between successive meshes
        #[arg(long = "drift-max")]
        drift_max: Option<f64>,
        /// Number of eigenfunction samples (default: frequency ladder past
        /// the finest mesh in 1D, 16 otherwise)
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "eigenlab",
    version,
    about = "Finite element spectral laboratory: assembles P1 elliptic operators on structured meshes and verifies spectral bounds",
    after_help = "Exit codes: 0 all checks pass, 1 any check fails, 2 usage/config error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Fully resolved run configuration (defaults < config file < flags).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub n: Vec<usize>,
    /// Raw `--n` list, used as a mesh family by `constants`.
    pub n_list: Vec<usize>,
    pub k_lo: usize,
    pub k_hi: usize,
    pub solver: SolverChoice,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub quad_degree: usize,
    pub quad_subdiv: Option<usize>,
    pub alpha_scalar: f64,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
    echo: Vec<(String, String)>,
}

impl RunConfig {
    pub fn eig_options(&self) -> EigOptions {
        EigOptions {
            solver: self.solver,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "domain",
    "lengths",
    "n",
    "bc",
    "k",
    "solver",
    "tol",
    "maxiter",
    "seed",
    "quad-degree",
    "quad-subdiv",
    "alpha-scalar",
    "out",
    "format",
    "refine",
    "delta",
    "window",
    "trials",
    "ks",
    "witness-n",
    "witness-k",
    "witness-trials",
    "c1",
    "c2",
    "projector",
    "drift-max",
    "samples",
    "dump",
    "dump-stiffness",
    "dump-mass",
];

/// `key = value` lines, `#` comments; unknown keys are rejected.
fn parse_config_file(path: &PathBuf) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {}", path.display(), e)))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected `key = value`, got `{}`",
                path.display(),
                lineno + 1,
                raw
            ))
        })?;
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "{}:{}: unknown key `{}`",
                path.display(),
                lineno + 1,
                key
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.parse()
        .map_err(|_| Error::Config(format!("key `{}`: cannot parse `{}` as a number", key, raw)))
}

fn parse_usize(key: &str, raw: &str) -> Result<usize> {
    raw.parse()
        .map_err(|_| Error::Config(format!("key `{}`: cannot parse `{}` as an integer", key, raw)))
}

fn parse_usize_list(key: &str, raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|p| parse_usize(key, p.trim()))
        .collect()
}

fn parse_f64_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',').map(|p| parse_f64(key, p.trim())).collect()
}

/// `k` (meaning 1..=k) or `a..b` (inclusive).
fn parse_k_range(raw: &str) -> Result<(usize, usize)> {
    if let Some((lo, hi)) = raw.split_once("..") {
        let lo = parse_usize("k", lo.trim())?;
        let hi = parse_usize("k", hi.trim())?;
        if lo == 0 || hi < lo {
            return Err(Error::Config(format!("key `k`: bad range `{}`", raw)));
        }
        Ok((lo, hi))
    } else {
        let hi = parse_usize("k", raw.trim())?;
        if hi == 0 {
            return Err(Error::Config("key `k`: must be at least 1".into()));
        }
        Ok((1, hi))
    }
}

/// A command-specific option that may come from the flag or the file.
struct OptionSource<'a> {
    file: &'a BTreeMap<String, String>,
}

impl<'a> OptionSource<'a> {
    fn usize_opt(&self, flag: Option<usize>, key: &str) -> Result<Option<usize>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .file
                .get(key)
                .map(|raw| parse_usize(key, raw))
                .transpose(),
        }
    }

    fn f64_opt(&self, flag: Option<f64>, key: &str) -> Result<Option<f64>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .file
                .get(key)
                .map(|raw| parse_f64(key, raw))
                .transpose(),
        }
    }

    fn string_opt(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.file.get(key).cloned())
    }
}

/// Resolves the common configuration: defaults, overridden by the config
/// file, overridden by flags. Validation happens before any computation.
pub fn parse_config(common: &CommonArgs) -> Result<RunConfig> {
    let file = match &common.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };

    let domain_kind = match &common.domain {
        Some(d) => *d,
        None => match file.get("domain").map(String::as_str) {
            Some("interval") => DomainArg::Interval,
            Some("square") => DomainArg::Square,
            Some("rect") => DomainArg::Rect,
            Some("box") => DomainArg::Box,
            Some(other) => {
                return Err(Error::Config(format!(
                    "key `domain`: unknown value `{}`",
                    other
                )))
            }
            None => DomainArg::Interval,
        },
    };
    let dim = match domain_kind {
        DomainArg::Interval => 1,
        DomainArg::Square | DomainArg::Rect => 2,
        DomainArg::Box => 3,
    };
    let kind = match domain_kind {
        DomainArg::Interval => DomainKind::Interval,
        DomainArg::Square | DomainArg::Rect => DomainKind::Rectangle,
        DomainArg::Box => DomainKind::Box,
    };

    let lengths_raw = common
        .lengths
        .clone()
        .or_else(|| file.get("lengths").cloned());
    let lengths = match lengths_raw {
        Some(raw) => {
            let vals = parse_f64_list("lengths", &raw)?;
            if vals.len() == 1 {
                vec![vals[0]; dim]
            } else {
                vals
            }
        }
        None => vec![1.0; dim],
    };

    let bc = match &common.bc {
        Some(BcArg::Dirichlet) => BoundaryCondition::Dirichlet,
        Some(BcArg::Neumann) => BoundaryCondition::Neumann,
        None => match file.get("bc").map(String::as_str) {
            Some("dirichlet") => BoundaryCondition::Dirichlet,
            Some("neumann") => BoundaryCondition::Neumann,
            Some(other) => {
                return Err(Error::Config(format!("key `bc`: unknown value `{}`", other)))
            }
            None => BoundaryCondition::Dirichlet,
        },
    };
    let domain = DomainSpec::new(kind, lengths, bc)
        .map_err(|e| Error::Config(format!("invalid domain: {}", e)))?;

    let n_raw = common.n.clone().or_else(|| file.get("n").cloned());
    let n_list = match n_raw {
        Some(raw) => parse_usize_list("n", &raw)?,
        None => vec![8],
    };
    if n_list.contains(&0) {
        return Err(Error::Config("key `n`: entries must be at least 1".into()));
    }
    let n = if n_list.len() == 1 {
        vec![n_list[0]; dim]
    } else if n_list.len() == dim {
        n_list.clone()
    } else {
        // commands that treat --n as a family validate n_list themselves
        vec![n_list[0]; dim]
    };

    let k_raw = common.k.clone().or_else(|| file.get("k").cloned());
    let (k_lo, k_hi) = match k_raw {
        Some(raw) => parse_k_range(&raw)?,
        None => (1, 6),
    };

    let solver = match &common.solver {
        Some(SolverArg::Dense) => SolverChoice::Dense,
        Some(SolverArg::Lobpcg) => SolverChoice::Lobpcg,
        None => match file.get("solver").map(String::as_str) {
            Some("dense") => SolverChoice::Dense,
            Some("lobpcg") => SolverChoice::Lobpcg,
            Some(other) => {
                return Err(Error::Config(format!(
                    "key `solver`: unknown value `{}`",
                    other
                )))
            }
            None => SolverChoice::Auto,
        },
    };

    let src = OptionSource { file: &file };
    let tol = src.f64_opt(common.tol, "tol")?.unwrap_or(1e-8);
    let max_iter = src.usize_opt(common.maxiter, "maxiter")?.unwrap_or(3000);
    let seed = match common.seed {
        Some(s) => s,
        None => file
            .get("seed")
            .map(|raw| {
                raw.parse::<u64>()
                    .map_err(|_| Error::Config(format!("key `seed`: bad value `{}`", raw)))
            })
            .transpose()?
            .unwrap_or(0),
    };
    let quad_degree = src.usize_opt(common.quad_degree, "quad-degree")?.unwrap_or(4);
    if quad_degree == 0 {
        return Err(Error::Config("key `quad-degree`: must be at least 1".into()));
    }
    let quad_subdiv = src.usize_opt(common.quad_subdiv, "quad-subdiv")?;
    if quad_subdiv == Some(0) {
        return Err(Error::Config("key `quad-subdiv`: must be at least 1".into()));
    }
    let alpha_scalar = src.f64_opt(common.alpha_scalar, "alpha-scalar")?.unwrap_or(1.0);
    if !(alpha_scalar > 0.0) {
        return Err(Error::Config("key `alpha-scalar`: must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Config("key `tol`: must be positive".into()));
    }
    let out = common
        .out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from));
    let format = match &common.format {
        Some(FormatArg::Csv) => ReportFormat::Csv,
        Some(FormatArg::Json) => ReportFormat::Json,
        None => match file.get("format").map(String::as_str) {
            Some("csv") => ReportFormat::Csv,
            Some("json") => ReportFormat::Json,
            Some(other) => {
                return Err(Error::Config(format!(
                    "key `format`: unknown value `{}`",
                    other
                )))
            }
            None => ReportFormat::Csv,
        },
    };

    let mut echo = vec![
        (
            "domain".to_string(),
            match domain_kind {
                DomainArg::Interval => "interval".to_string(),
                DomainArg::Square => "square".to_string(),
                DomainArg::Rect => "rect".to_string(),
                DomainArg::Box => "box".to_string(),
            },
        ),
        (
            "lengths".to_string(),
            domain
                .lengths
                .iter()
                .map(|v| format!("{}", v))
                .collect::<Vec<_>>()
                .join(","),
        ),
        (
            "n".to_string(),
            n_list
                .iter()
                .map(|v| format!("{}", v))
                .collect::<Vec<_>>()
                .join(","),
        ),
        (
            "bc".to_string(),
            match bc {
                BoundaryCondition::Dirichlet => "dirichlet".into(),
                BoundaryCondition::Neumann => "neumann".into(),
            },
        ),
        ("k".to_string(), format!("{}..{}", k_lo, k_hi)),
        (
            "solver".to_string(),
            match solver {
                SolverChoice::Auto => "auto".into(),
                SolverChoice::Dense => "dense".into(),
                SolverChoice::Lobpcg => "lobpcg".into(),
            },
        ),
        ("tol".to_string(), format!("{}", tol)),
        ("maxiter".to_string(), format!("{}", max_iter)),
        ("quad-degree".to_string(), format!("{}", quad_degree)),
        (
            "quad-subdiv".to_string(),
            quad_subdiv.map_or("auto".into(), |s| format!("{}", s)),
        ),
        ("alpha-scalar".to_string(), format!("{}", alpha_scalar)),
    ];
    echo.sort();

    Ok(RunConfig {
        domain,
        n,
        n_list,
        k_lo,
        k_hi,
        solver,
        tol,
        max_iter,
        seed,
        quad_degree,
        quad_subdiv,
        alpha_scalar,
        out,
        format,
        echo,
    })
}

fn level_label(n: &[usize]) -> String {
    n.iter()
        .map(|v| format!("{}", v))
        .collect::<Vec<_>>()
        .join("x")
}

type Pencil = (
    Mesh,
    crate::linalg::SparseSymMatrix,
    crate::linalg::SparseSymMatrix,
);

fn build_pencil(domain: &DomainSpec, n: &[usize], alpha_scalar: f64) -> Result<Pencil> {
    let mesh = build_mesh(domain, n)?;
    let alpha = CoefficientField::scalar(alpha_scalar)?;
    let a = assemble_stiffness(&mesh, &alpha, mesh.dof_map())?;
    let m = assemble_mass(&mesh, mesh.dof_map())?;
    Ok((mesh, a, m))
}

fn run_mesh_info(cfg: &RunConfig, dump: &Option<PathBuf>) -> Result<VerificationReport> {
    let mesh = build_mesh(&cfg.domain, &cfg.n)?;
    let metrics = mesh_metrics(&mesh)?;
    let conforming = mesh.validate_conformity().is_ok();
    let vol_exact = cfg.domain.volume();
    let vol_ok = (metrics.total_volume - vol_exact).abs() <= 1e-12 * vol_exact;
    let mut report = VerificationReport::new(
        "mesh-info",
        &[
            "dim",
            "vertices",
            "cells",
            "boundary_vertices",
            "free_dofs",
            "h",
            "quasi_uniformity",
            "volume_sum",
            "volume_exact",
        ],
    );
    report.set_constant("h", metrics.h);
    report.set_constant("quasi_uniformity", metrics.quasi_uniformity);
    report.push_row(
        vec![
            mesh.dim().into(),
            mesh.n_vertices().into(),
            mesh.n_cells().into(),
            mesh.boundary_vertices().len().into(),
            mesh.n_dofs().into(),
            metrics.h.into(),
            metrics.quasi_uniformity.into(),
            metrics.total_volume.into(),
            vol_exact.into(),
        ],
        if conforming && vol_ok {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        },
    );
    if let Some(path) = dump {
        let mut f = fs::File::create(path)?;
        mesh.write_dump(&mut f)?;
    }
    Ok(report)
}

fn run_eigs(
    cfg: &RunConfig,
    dump_stiffness: &Option<PathBuf>,
    dump_mass: &Option<PathBuf>,
) -> Result<VerificationReport> {
    let (_, a, m) = build_pencil(&cfg.domain, &cfg.n, cfg.alpha_scalar)?;
    if let Some(path) = dump_stiffness {
        let mut f = fs::File::create(path)?;
        a.write_coo(&mut f)?;
    }
    if let Some(path) = dump_mass {
        let mut f = fs::File::create(path)?;
        m.write_coo(&mut f)?;
    }
    let k = cfg.k_hi.min(a.order());
    let result = solve_smallest(&a, &m, k, &cfg.eig_options())?;
    let check = residual_check(&a, &m, &result, cfg.tol)?;
    let mut report = VerificationReport::new("eigs", &["k", "lambda_hk", "residual"]);
    report.set_constant("dofs", a.order() as f64);
    report.set_constant("iterations", result.iterations as f64);
    report.set_constant("solver_dense", f64::from(result.solver == crate::eigensolver::SolverKind::Dense));
    for i in 0..k {
        report.push_row(
            vec![
                (i + 1).into(),
                result.values[i].into(),
                check.relative[i].into(),
            ],
            if check.pass[i] {
                RowStatus::Pass
            } else {
                RowStatus::Fail
            },
        );
    }
    Ok(report)
}

fn run_bound_check(cfg: &RunConfig, refine: usize) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(
        "bound-check",
        &["level", "k", "lambda_k", "lambda_hk", "ratio"],
    );
    let bc = cfg.domain.bc;
    let mut cw_per_level: Vec<f64> = Vec::new();
    for level in 0..refine.max(1) {
        let n: Vec<usize> = cfg.n.iter().map(|&v| v << level).collect();
        let label = level_label(&n);
        let (_, a, m) = build_pencil(&cfg.domain, &n, cfg.alpha_scalar)?;
        let k = cfg.k_hi.min(a.order());
        let discrete = solve_smallest(&a, &m, k, &cfg.eig_options())?;
        let spectrum = continuous_spectrum(&cfg.domain, k)?;
        let mut cw = 0.0f64;
        for i in 0..k {
            let ki = i + 1;
            let lambda_k = cfg.alpha_scalar * spectrum.entries[i].value;
            let lambda_hk = discrete.values[i];
            if bc == BoundaryCondition::Neumann && ki == 1 {
                // zero mode: compare absolutely against the next eigenvalue
                let next = discrete.values.get(1).copied().unwrap_or(f64::INFINITY);
                let ratio = lambda_hk / next;
                report.push_row(
                    vec![
                        label.clone().into(),
                        ki.into(),
                        lambda_k.into(),
                        lambda_hk.into(),
                        ratio.into(),
                    ],
                    if ratio.abs() <= 1e-10 {
                        RowStatus::Pass
                    } else {
                        RowStatus::Fail
                    },
                );
                continue;
            }
            let ratio = lambda_hk / lambda_k;
            cw = cw.max(ratio);
            report.push_row(
                vec![
                    label.clone().into(),
                    ki.into(),
                    lambda_k.into(),
                    lambda_hk.into(),
                    ratio.into(),
                ],
                if ratio >= 1.0 - 1e-8 {
                    RowStatus::Pass
                } else {
                    RowStatus::Fail
                },
            );
        }
        report.set_constant(format!("C_w_level_{}", label), cw);
        cw_per_level.push(cw);
    }
    let cw_overall = cw_per_level.iter().fold(0.0f64, |m, &v| m.max(v));
    report.set_constant("C_w", cw_overall);
    let mut drift_max = 0.0f64;
    for pair in cw_per_level.windows(2) {
        drift_max = drift_max.max((pair[1] - pair[0]).abs() / pair[0]);
    }
    report.set_constant("C_w_drift_max", drift_max);
    Ok(report)
}

fn run_weyl_check(
    cfg: &RunConfig,
    delta: f64,
    window: Option<(usize, usize)>,
) -> Result<VerificationReport> {
    let bc = cfg.domain.bc;
    let skip_zero = bc == BoundaryCondition::Neumann;
    let d = cfg.domain.dim();
    let w_eff = cfg.alpha_scalar * weyl_constant(&cfg.domain).w_omega;

    let k_cont = cfg.k_hi + usize::from(skip_zero);
    let spectrum = continuous_spectrum(&cfg.domain, k_cont)?;
    let cont_values: Vec<f64> = spectrum
        .values()
        .iter()
        .map(|v| cfg.alpha_scalar * v)
        .collect();
    let cont_rows = weyl_ratio_table(&cont_values, d, skip_zero);

    let (_, a, m) = build_pencil(&cfg.domain, &cfg.n, cfg.alpha_scalar)?;
    let k_disc = (cfg.k_hi + usize::from(skip_zero)).min(a.order());
    let discrete = solve_smallest(&a, &m, k_disc, &cfg.eig_options())?;
    let disc_rows = weyl_ratio_table(&discrete.values, d, skip_zero);

    let mut report =
        VerificationReport::new("weyl-check", &["series", "k", "lambda", "ratio"]);
    report.set_constant("w_omega", w_eff);
    report.set_constant("delta", delta);
    for r in &cont_rows {
        report.push_row(
            vec!["continuous".into(), r.k.into(), r.lambda.into(), r.ratio.into()],
            RowStatus::Pass,
        );
    }
    for r in &disc_rows {
        report.push_row(
            vec!["discrete".into(), r.k.into(), r.lambda.into(), r.ratio.into()],
            RowStatus::Pass,
        );
    }
    let (w_lo, w_hi) = window.unwrap_or((cfg.k_lo, cfg.k_hi));
    let (gamma0, gamma1) = ratio_extrema(&disc_rows, w_lo, w_hi).ok_or_else(|| {
        Error::InvalidArgument(format!("empty ratio window {}..{}", w_lo, w_hi))
    })?;
    report.set_constant("gamma0", gamma0);
    report.set_constant("gamma1", gamma1);
    if let Some((c0, c1)) = ratio_extrema(&cont_rows, w_lo, w_hi) {
        report.set_constant("continuous_ratio_min", c0);
        report.set_constant("continuous_ratio_max", c1);
    }
    report.push_row(
        vec![
            "gamma0".into(),
            w_lo.into(),
            gamma0.into(),
            (gamma0 / w_eff).into(),
        ],
        if gamma0 > 0.0 && gamma0 <= w_eff * (1.0 + delta) {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        },
    );
    report.push_row(
        vec![
            "gamma1".into(),
            w_hi.into(),
            gamma1.into(),
            (gamma1 / w_eff).into(),
        ],
        if gamma1.is_finite() && gamma1 >= gamma0 {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        },
    );
    Ok(report)
}

fn run_inverse_check(cfg: &RunConfig, refine: usize) -> Result<VerificationReport> {
    if refine < 2 {
        return Err(Error::InvalidArgument(
            "inverse-check needs at least 2 refinement levels".into(),
        ));
    }
    let mut report = VerificationReport::new(
        "inverse-check",
        &["level", "h", "dofs", "lambda_max", "product"],
    );
    let mut products = Vec::new();
    for level in 0..refine {
        let n: Vec<usize> = cfg.n.iter().map(|&v| v << level).collect();
        let label = level_label(&n);
        let (mesh, a, m) = build_pencil(&cfg.domain, &n, cfg.alpha_scalar)?;
        let h = mesh_metrics(&mesh)?.h;
        // the top of the spectrum comes from the dense oracle
        let dense = crate::linalg::dense_generalized_eig(
            &DenseSymMatrix::from_sparse(&a),
            &DenseSymMatrix::from_sparse(&m),
        )?;
        let lambda_max = *dense.values.last().expect("nonempty spectrum");
        let product = lambda_max * h * h;
        products.push(product);
        report.push_row(
            vec![
                label.into(),
                h.into(),
                a.order().into(),
                lambda_max.into(),
                product.into(),
            ],
            RowStatus::Pass,
        );
    }
    let pmin = products.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmax = products.iter().cloned().fold(0.0f64, f64::max);
    let spread = pmax / pmin;
    report.set_constant("product_min", pmin);
    report.set_constant("product_max", pmax);
    report.set_constant("spread", spread);
    report.push_row(
        vec![
            "spread".into(),
            0.0.into(),
            0usize.into(),
            0.0.into(),
            spread.into(),
        ],
        if spread < 2.0 {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        },
    );
    Ok(report)
}

fn run_minmax_test(
    cfg: &RunConfig,
    trials: usize,
    ks: Option<Vec<usize>>,
    witness_n: usize,
    witness_k: usize,
    witness_trials: usize,
) -> Result<VerificationReport> {
    let n = cfg.n_list[0].max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = DenseSymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            a.set_sym(i, j, rng.sample::<f64, _>(StandardNormal));
        }
    }
    let ks = ks.unwrap_or_else(|| {
        let mut v = vec![1, 5.min(n), n / 2, n];
        v.retain(|&k| k >= 1 && k <= n);
        v.dedup();
        v
    });
    let params = MinMaxParams {
        ks,
        trials,
        seed: cfg.seed + 1,
    };
    let mut report = verify_courant_fischer(&a, &params)?;

    // intersection witness batch
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    let tail = SubspaceBasis::coordinate(
        witness_n,
        &(witness_k - 1..witness_n).collect::<Vec<_>>(),
    )?;
    for t in 0..witness_trials {
        let mut wrng = ChaCha8Rng::seed_from_u64(cfg.seed + 77_000 + t as u64);
        let w = SubspaceBasis::random(witness_n, witness_k, &mut wrng)?;
        match intersection_witness(witness_n, witness_k, &w, cfg.seed + t as u64) {
            Ok(psi) => {
                let res = w.distance(&psi).max(tail.distance(&psi));
                worst = worst.max(res);
                if res > 1e-8 {
                    violations += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }
    report.push_row(
        vec![
            "intersection_witness".into(),
            witness_k.into(),
            witness_trials.into(),
            violations.into(),
            worst.into(),
        ],
        if violations == 0 {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        },
    );
    Ok(report)
}

fn auto_quad(cfg: &RunConfig, h: f64, sqrt_lambda_max: f64) -> QuadratureSpec {
    match cfg.quad_subdiv {
        Some(s) => QuadratureSpec {
            degree: cfg.quad_degree,
            subdivisions: s,
        },
        None => QuadratureSpec::for_frequency(sqrt_lambda_max.max(1.0), h, cfg.quad_degree),
    }
}

fn run_error_estimate(
    cfg: &RunConfig,
    c1: Option<f64>,
    c2: Option<f64>,
) -> Result<VerificationReport> {
    let mesh = build_mesh(&cfg.domain, &cfg.n)?;
    let h = mesh_metrics(&mesh)?.h;
    let (c1_hat, c2_hat) = match (c1, c2) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            // measure on a coarser/finer pair around the requested mesh
            let n_max = *cfg.n.iter().max().unwrap();
            let family: Vec<usize> = [n_max / 2, n_max]
                .iter()
                .copied()
                .filter(|&v| v >= 2)
                .collect();
            let k_samples = (3 * n_max / 2).max(8);
            let mut samples = eigenfunction_samples(&cfg.domain, k_samples)?;
            samples.extend(random_trig_samples(
                &cfg.domain,
                4,
                k_samples.min(24),
                cfg.seed,
            )?);
            let est = estimate_constants(
                &cfg.domain,
                &family,
                Projector::L2,
                &samples,
                cfg.quad_degree,
            )?;
            (c1.unwrap_or(est.c1_hat), c2.unwrap_or(est.c2_hat))
        }
    };
    let spectrum = continuous_spectrum(&cfg.domain, cfg.k_hi)?;
    let sqrt_lambda = spectrum.entries[cfg.k_hi - 1].value.sqrt();
    let params = ErrorEstimateParams {
        k_lo: cfg.k_lo,
        k_hi: cfg.k_hi,
        c1_hat,
        c2_hat,
        quad: auto_quad(cfg, h, sqrt_lambda),
        eig: cfg.eig_options(),
    };
    error_estimate_check(&cfg.domain, &mesh, &params)
}

fn run_constants(
    cfg: &RunConfig,
    projector: Projector,
    drift_max: f64,
    samples_override: Option<usize>,
) -> Result<VerificationReport> {
    let family = &cfg.n_list;
    let n_max = *family.iter().max().unwrap();
    let k_samples = samples_override.unwrap_or(if cfg.domain.dim() == 1 {
        (3 * n_max / 2).max(8)
    } else {
        16
    });
    let mut samples = eigenfunction_samples(&cfg.domain, k_samples)?;
    samples.extend(random_trig_samples(
        &cfg.domain,
        4,
        k_samples.min(24),
        cfg.seed,
    )?);
    let est = estimate_constants(
        &cfg.domain,
        family,
        projector,
        &samples,
        cfg.quad_degree,
    )?;
    let mut report = VerificationReport::new(
        "constants",
        &["n", "h", "c1", "c1_squared_convention", "c2"],
    );
    report.set_constant("c1_hat", est.c1_hat);
    report.set_constant("c1_sq_hat", est.c1_sq_hat);
    report.set_constant("c2_hat", est.c2_hat);
    report.set_constant("samples", samples.len() as f64);
    for row in &est.rows {
        report.push_row(
            vec![
                row.n.into(),
                row.h.into(),
                row.c1.into(),
                row.c1_squared_convention.into(),
                row.c2.into(),
            ],
            RowStatus::Pass,
        );
    }
    let mut drift_c1 = 0.0f64;
    let mut drift_c2 = 0.0f64;
    for pair in est.rows.windows(2) {
        drift_c1 = drift_c1.max((pair[1].c1 - pair[0].c1).abs() / pair[0].c1.max(1e-300));
        drift_c2 = drift_c2.max((pair[1].c2 - pair[0].c2).abs() / pair[0].c2.max(1e-300));
    }
    report.set_constant("drift_c1", drift_c1);
    report.set_constant("drift_c2", drift_c2);
    report.push_row(
        vec![
            "drift".into(),
            0.0.into(),
            drift_c1.into(),
            0.0.into(),
            drift_c2.into(),
        ],
        if est.rows.len() < 2 || (drift_c1 <= drift_max && drift_c2 <= drift_max) {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        },
    );
    Ok(report)
}

/// Executes a parsed command; the returned report carries provenance.
pub fn execute(cli: &Cli) -> Result<VerificationReport> {
    let cfg = parse_config(&cli.common)?;
    let file = match &cli.common.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    let src = OptionSource { file: &file };
    let mut report = match &cli.command {
        Command::MeshInfo { dump } => {
            let dump = dump
                .clone()
                .or_else(|| file.get("dump").map(PathBuf::from));
            run_mesh_info(&cfg, &dump)?
        }
        Command::Eigs {
            dump_stiffness,
            dump_mass,
        } => {
            let ds = dump_stiffness
                .clone()
                .or_else(|| file.get("dump-stiffness").map(PathBuf::from));
            let dm = dump_mass
                .clone()
                .or_else(|| file.get("dump-mass").map(PathBuf::from));
            run_eigs(&cfg, &ds, &dm)?
        }
        Command::BoundCheck { refine } => {
            let refine = src.usize_opt(*refine, "refine")?.unwrap_or(1);
            run_bound_check(&cfg, refine)?
        }
        Command::WeylCheck { delta, window } => {
            let delta = src.f64_opt(*delta, "delta")?.unwrap_or(0.5);
            let window = match src.string_opt(window.clone(), "window") {
                Some(raw) => Some(parse_k_range(&raw)?),
                None => None,
            };
            run_weyl_check(&cfg, delta, window)?
        }
        Command::InverseCheck { refine } => {
            let refine = src.usize_opt(*refine, "refine")?.unwrap_or(3);
            run_inverse_check(&cfg, refine)?
        }
        Command::MinmaxTest {
            trials,
            ks,
            witness_n,
            witness_k,
            witness_trials,
        } => {
            let trials = src.usize_opt(*trials, "trials")?.unwrap_or(200);
            let ks = match src.string_opt(ks.clone(), "ks") {
                Some(raw) => Some(parse_usize_list("ks", &raw)?),
                None => None,
            };
            let wn = src.usize_opt(*witness_n, "witness-n")?.unwrap_or(40);
            let wk = src.usize_opt(*witness_k, "witness-k")?.unwrap_or(7);
            let wt = src.usize_opt(*witness_trials, "witness-trials")?.unwrap_or(100);
            if wk == 0 || wk > wn {
                return Err(Error::Config(format!(
                    "witness subspace dimension {} out of range for ambient {}",
                    wk, wn
                )));
            }
            run_minmax_test(&cfg, trials, ks, wn, wk, wt)?
        }
        Command::ErrorEstimate { c1, c2 } => {
            let c1 = src.f64_opt(*c1, "c1")?;
            let c2 = src.f64_opt(*c2, "c2")?;
            run_error_estimate(&cfg, c1, c2)?
        }
        Command::Constants {
            projector,
            drift_max,
            samples,
        } => {
            let projector = match projector {
                Some(ProjectorArg::Qh) => Projector::L2,
                Some(ProjectorArg::Ph) => Projector::Elliptic,
                None => match file.get("projector").map(String::as_str) {
                    Some("qh") => Projector::L2,
                    Some("ph") => Projector::Elliptic,
                    Some(other) => {
                        return Err(Error::Config(format!(
                            "key `projector`: unknown value `{}`",
                            other
                        )))
                    }
                    None => Projector::L2,
                },
            };
            let drift_max = src.f64_opt(*drift_max, "drift-max")?.unwrap_or(0.2);
            let samples = src.usize_opt(*samples, "samples")?;
            run_constants(&cfg, projector, drift_max, samples)?
        }
    };
    report.provenance.command = command_name(&cli.command).to_string();
    report.provenance.version = VERSION.to_string();
    report.provenance.seed = Some(cfg.seed);
    report.provenance.config = cfg.echo.clone();
    Ok(report)
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::MeshInfo { .. } => "mesh-info",
        Command::Eigs { .. } => "eigs",
        Command::BoundCheck { .. } => "bound-check",
        Command::WeylCheck { .. } => "weyl-check",
        Command::InverseCheck { .. } => "inverse-check",
        Command::MinmaxTest { .. } => "minmax-test",
        Command::ErrorEstimate { .. } => "error-estimate",
        Command::Constants { .. } => "constants",
    }
}

/// Runs a parsed command line and maps the outcome to an exit code:
/// 0 all checks pass, 1 failures (or runtime error), 2 usage/config error.
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(report) => {
            // execute() succeeded, so the same config resolves again.
            let (out, format) = match parse_config(&cli.common) {
                Ok(cfg) => (cfg.out, cfg.format),
                Err(_) => (None, ReportFormat::Csv),
            };
            let write_result = match out {
                Some(path) => fs::File::create(&path)
                    .map_err(Error::from)
                    .and_then(|mut f| report.write_to(&mut f, format)),
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    report
                        .write_to(&mut lock, format)
                        .and_then(|()| lock.flush().map_err(Error::from))
                }
            };
            if let Err(e) = write_result {
                eprintln!("error: {}", e);
                return 1;
            }
            if report.overall_pass() {
                0
            } else {
                1
            }
        }
        Err(Error::Config(msg)) => {
            eprintln!("error: {}", msg);
            2
        }
        Err(e) => {
            eprintln!("error: {}", e);
            1
        }
    }
}
