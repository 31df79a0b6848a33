//! Exact eigenvalues and eigenfunctions of the Laplacian on the separable
//! model domains, and Weyl-ratio tables.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::{BoundaryCondition, DomainSpec, Point};

/// One continuous eigenvalue with its separable multi-index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEntry {
    pub value: f64,
    /// Per-axis mode numbers; Dirichlet indices start at 1, Neumann at 0.
    pub index: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct ContinuousSpectrum {
    pub domain: DomainSpec,
    /// Ascending; ties ordered lexicographically by multi-index.
    pub entries: Vec<SpectrumEntry>,
}

impl ContinuousSpectrum {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// Number of eigenvalues <= lambda among the enumerated entries.
    pub fn counting_function(&self, lambda: f64) -> usize {
        self.entries.iter().take_while(|e| e.value <= lambda).count()
    }
}

fn axis_lambda(domain: &DomainSpec, index: &[usize; 3]) -> f64 {
    let mut acc = 0.0;
    for (i, &l) in domain.lengths.iter().enumerate() {
        let m = index[i] as f64;
        acc += (m * PI / l).powi(2);
    }
    acc
}

/// First `k` exact eigenvalues lambda = pi^2 sum_i m_i^2 / L_i^2, by bounded
/// lattice enumeration. Dirichlet modes use m_i >= 1, Neumann m_i >= 0 (so
/// the Neumann list starts with the zero mode).
pub fn continuous_spectrum(domain: &DomainSpec, k: usize) -> Result<ContinuousSpectrum> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one eigenvalue".into()));
    }
    let d = domain.dim();
    let w = weyl_constant(domain).w_omega;
    // Weyl-based overestimate of lambda_k, then enlarge until the lattice
    // ball is provably big enough; doubling handles the small-k regime where
    // the asymptotic underestimates.
    let mut bound = 1.5 * (w * (k as f64).powf(2.0 / d as f64)).max(axis_lambda(
        domain,
        &match d {
            1 => [1, 0, 0],
            2 => [1, 1, 0],
            _ => [1, 1, 1],
        },
    ));
    loop {
        let entries = enumerate_below(domain, bound);
        if entries.len() >= k {
            let mut entries = entries;
            entries.truncate(k);
            return Ok(ContinuousSpectrum {
                domain: domain.clone(),
                entries,
            });
        }
        bound *= 2.0;
    }
}

fn enumerate_below(domain: &DomainSpec, bound: f64) -> Vec<SpectrumEntry> {
    let d = domain.dim();
    let start = match domain.bc {
        BoundaryCondition::Dirichlet => 1usize,
        BoundaryCondition::Neumann => 0usize,
    };
    let max_m = |l: f64| (bound.sqrt() * l / PI).floor() as usize;
    let mut entries = Vec::new();
    let m1_hi = max_m(domain.lengths[0]);
    for m1 in start..=m1_hi.max(start) {
        let idx1 = [m1, 0, 0];
        if d == 1 {
            let v = axis_lambda(domain, &idx1);
            if v <= bound {
                entries.push(SpectrumEntry {
                    value: v,
                    index: idx1,
                });
            }
            continue;
        }
        let m2_hi = max_m(domain.lengths[1]);
        for m2 in start..=m2_hi.max(start) {
            let idx2 = [m1, m2, 0];
            if d == 2 {
                let v = axis_lambda(domain, &idx2);
                if v <= bound {
                    entries.push(SpectrumEntry {
                        value: v,
                        index: idx2,
                    });
                }
                continue;
            }
            let m3_hi = max_m(domain.lengths[2]);
            for m3 in start..=m3_hi.max(start) {
                let idx3 = [m1, m2, m3];
                let v = axis_lambda(domain, &idx3);
                if v <= bound {
                    entries.push(SpectrumEntry {
                        value: v,
                        index: idx3,
                    });
                }
            }
        }
    }
    entries.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap()
            .then_with(|| a.index.cmp(&b.index))
    });
    entries
}

/// L2-normalized separable eigenfunction: products of sines for Dirichlet,
/// cosines for Neumann (constant mode 1/sqrt(Vol)).
pub struct Eigenfunction {
    domain: DomainSpec,
    index: [usize; 3],
    lambda: f64,
    norm: f64,
}

impl Eigenfunction {
    pub fn new(domain: &DomainSpec, index: [usize; 3]) -> Result<Self> {
        let d = domain.dim();
        if domain.bc == BoundaryCondition::Dirichlet && index[..d].contains(&0) {
            return Err(Error::InvalidArgument(
                "Dirichlet mode numbers start at 1".into(),
            ));
        }
        let lambda = axis_lambda(domain, &index);
        let mut norm = 1.0;
        for (i, &l) in domain.lengths.iter().enumerate() {
            norm *= if domain.bc == BoundaryCondition::Neumann && index[i] == 0 {
                (1.0 / l).sqrt()
            } else {
                (2.0 / l).sqrt()
            };
        }
        Ok(Self {
            domain: domain.clone(),
            index,
            lambda,
            norm,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn index(&self) -> [usize; 3] {
        self.index
    }

    fn axis_value(&self, i: usize, xi: f64) -> f64 {
        let l = self.domain.lengths[i];
        let m = self.index[i] as f64;
        match self.domain.bc {
            BoundaryCondition::Dirichlet => (m * PI * xi / l).sin(),
            BoundaryCondition::Neumann => (m * PI * xi / l).cos(),
        }
    }

    fn axis_derivative(&self, i: usize, xi: f64) -> f64 {
        let l = self.domain.lengths[i];
        let m = self.index[i] as f64;
        let k = m * PI / l;
        match self.domain.bc {
            BoundaryCondition::Dirichlet => k * (k * xi).cos(),
            BoundaryCondition::Neumann => -k * (k * xi).sin(),
        }
    }
}

impl Field for Eigenfunction {
    fn value(&self, x: &Point) -> f64 {
        let d = self.domain.dim();
        let mut v = self.norm;
        for i in 0..d {
            v *= self.axis_value(i, x[i]);
        }
        v
    }

    fn gradient(&self, x: &Point) -> Point {
        let d = self.domain.dim();
        let mut g = [0.0; 3];
        for k in 0..d {
            let mut gk = self.norm;
            for i in 0..d {
                gk *= if i == k {
                    self.axis_derivative(i, x[i])
                } else {
                    self.axis_value(i, x[i])
                };
            }
            g[k] = gk;
        }
        g
    }

    fn frequency_hint(&self) -> f64 {
        self.lambda.sqrt()
    }
}

/// Values (and gradients) of an eigenfunction at points that must lie in the
/// closure of the domain.
pub fn eigenfunction_eval(
    domain: &DomainSpec,
    index: [usize; 3],
    points: &[Point],
) -> Result<Vec<(f64, Point)>> {
    let phi = Eigenfunction::new(domain, index)?;
    let d = domain.dim();
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        for i in 0..d {
            let l = domain.lengths[i];
            if p[i] < -1e-12 * l || p[i] > l * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "point {:?} outside domain",
                    &p[..d]
                )));
            }
        }
        out.push((phi.value(p), phi.gradient(p)));
    }
    Ok(out)
}

/// Weyl constant of the domain: w = (2 pi)^2 / (omega_d Vol)^{2/d}.
#[derive(Debug, Clone, Copy)]
pub struct WeylData {
    pub w_omega: f64,
    pub omega_d: f64,
    pub vol: f64,
}

pub fn weyl_constant(domain: &DomainSpec) -> WeylData {
    let d = domain.dim();
    let omega_d = match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => unreachable!(),
    };
    let vol = domain.volume();
    let w_omega = (2.0 * PI).powi(2) / (omega_d * vol).powf(2.0 / d as f64);
    WeylData {
        w_omega,
        omega_d,
        vol,
    }
}

/// One row of a Weyl-ratio table.
#[derive(Debug, Clone, Copy)]
pub struct RatioRow {
    /// 1-based index after any zero-mode exclusion.
    pub k: usize,
    pub lambda: f64,
    pub ratio: f64,
}

/// Ratios lambda_k / k^{2/d} for an ascending list of eigenvalues. With
/// `skip_zero_mode` the first value (the Neumann zero mode) is dropped and
/// the remaining values are re-indexed from one.
pub fn weyl_ratio_table(values: &[f64], d: usize, skip_zero_mode: bool) -> Vec<RatioRow> {
    let offset = usize::from(skip_zero_mode);
    values
        .iter()
        .skip(offset)
        .enumerate()
        .map(|(i, &lambda)| {
            let k = i + 1;
            RatioRow {
                k,
                lambda,
                ratio: lambda / (k as f64).powf(2.0 / d as f64),
            }
        })
        .collect()
}

/// Min and max ratio over the (1-based, inclusive) index window.
pub fn ratio_extrema(rows: &[RatioRow], k_lo: usize, k_hi: usize) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in rows {
        if r.k >= k_lo && r.k <= k_hi {
            lo = lo.min(r.ratio);
            hi = hi.max(r.ratio);
        }
    }
    (lo.is_finite() && hi.is_finite()).then_some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainKind};
    use crate::quadrature::{integrate, simplex_rule, QuadratureSpec};

    fn interval(bc: BoundaryCondition) -> DomainSpec {
        DomainSpec::interval(1.0, bc).unwrap()
    }

    #[test]
    fn interval_dirichlet_first_three() {
        let s = continuous_spectrum(&interval(BoundaryCondition::Dirichlet), 3).unwrap();
        let v = s.values();
        assert!((v[0] - PI * PI).abs() < 1e-12);
        assert!((v[1] - 4.0 * PI * PI).abs() < 1e-12);
        assert!((v[2] - 9.0 * PI * PI).abs() < 1e-11);
    }

    #[test]
    fn interval_neumann_starts_at_zero() {
        let s = continuous_spectrum(&interval(BoundaryCondition::Neumann), 3).unwrap();
        let v = s.values();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - PI * PI).abs() < 1e-12);
        assert!((v[2] - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn unit_square_multiplicities() {
        let dom = DomainSpec::rectangle([1.0, 1.0], BoundaryCondition::Dirichlet).unwrap();
        let s = continuous_spectrum(&dom, 4).unwrap();
        let v = s.values();
        assert!((v[0] - 2.0 * PI * PI).abs() < 1e-12);
        assert!((v[1] - 5.0 * PI * PI).abs() < 1e-11);
        assert!((v[2] - 5.0 * PI * PI).abs() < 1e-11);
        assert!((v[3] - 8.0 * PI * PI).abs() < 1e-11);
        // tie broken lexicographically
        assert_eq!(s.entries[1].index, [1, 2, 0]);
        assert_eq!(s.entries[2].index, [2, 1, 0]);
    }

    #[test]
    fn enumeration_is_complete() {
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            for (kind, lengths) in [
                (DomainKind::Interval, vec![1.0]),
                (DomainKind::Rectangle, vec![1.0, 1.3]),
                (DomainKind::Box, vec![1.0, 1.0, 0.7]),
            ] {
                let dom = DomainSpec::new(kind, lengths, bc).unwrap();
                let a = continuous_spectrum(&dom, 30).unwrap();
                let b = continuous_spectrum(&dom, 60).unwrap();
                for i in 0..30 {
                    assert_eq!(a.entries[i].index, b.entries[i].index);
                    assert_eq!(a.entries[i].value, b.entries[i].value);
                }
            }
        }
    }

    #[test]
    fn counting_function_matches_direct_count() {
        let dom = DomainSpec::rectangle([1.0, 1.0], BoundaryCondition::Dirichlet).unwrap();
        let s = continuous_spectrum(&dom, 200).unwrap();
        let values = s.values();
        for lambda in [15.0, 60.0, 199.0, 500.0] {
            let direct = values.iter().filter(|&&v| v <= lambda).count();
            assert_eq!(s.counting_function(lambda), direct);
        }
        // non-decreasing in lambda
        assert!(s.counting_function(100.0) <= s.counting_function(200.0));
    }

    #[test]
    fn eigenfunction_point_values() {
        let dom = interval(BoundaryCondition::Dirichlet);
        let out = eigenfunction_eval(&dom, [1, 0, 0], &[[0.5, 0.0, 0.0]]).unwrap();
        assert!((out[0].0 - std::f64::consts::SQRT_2).abs() < 1e-14);
        assert!(
            eigenfunction_eval(&dom, [1, 0, 0], &[[1.5, 0.0, 0.0]]).is_err(),
            "point outside the domain must be rejected"
        );
    }

    #[test]
    fn eigenfunctions_are_orthonormal_under_quadrature() {
        let dom = DomainSpec::rectangle([1.0, 1.0], BoundaryCondition::Dirichlet).unwrap();
        let mesh = build_mesh(&dom, &[8, 8]).unwrap();
        let phi1 = Eigenfunction::new(&dom, [1, 1, 0]).unwrap();
        let phi2 = Eigenfunction::new(&dom, [2, 1, 0]).unwrap();
        let spec = QuadratureSpec::for_frequency(phi2.frequency_hint(), 0.25, 12);
        let rule = simplex_rule(2, &spec);
        let n1 = integrate(&mesh, &rule, |_, x| phi1.value(x) * phi1.value(x));
        let n12 = integrate(&mesh, &rule, |_, x| phi1.value(x) * phi2.value(x));
        assert!((n1 - 1.0).abs() < 1e-8);
        assert!(n12.abs() < 1e-8);
        // Neumann constant mode normalizes to 1/sqrt(Vol)
        let domn = DomainSpec::rectangle([2.0, 1.0], BoundaryCondition::Neumann).unwrap();
        let c = Eigenfunction::new(&domn, [0, 0, 0]).unwrap();
        assert!((c.value(&[0.3, 0.9, 0.0]) - (1.0f64 / 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn weyl_constants_for_model_domains() {
        let wi = weyl_constant(&interval(BoundaryCondition::Dirichlet));
        assert!((wi.w_omega - PI * PI).abs() < 1e-12);
        assert_eq!(wi.omega_d, 2.0);
        let ws = weyl_constant(
            &DomainSpec::rectangle([1.0, 1.0], BoundaryCondition::Dirichlet).unwrap(),
        );
        assert!((ws.w_omega - 4.0 * PI).abs() < 1e-12);
        let wc = weyl_constant(
            &DomainSpec::cuboid([1.0, 1.0, 1.0], BoundaryCondition::Dirichlet).unwrap(),
        );
        assert!((wc.w_omega - 4.0 * PI * PI / (4.0 * PI / 3.0).powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((wc.w_omega - 15.192666).abs() < 1e-5);
    }

    #[test]
    fn interval_ratios_are_pi_squared() {
        let s = continuous_spectrum(&interval(BoundaryCondition::Dirichlet), 50).unwrap();
        let rows = weyl_ratio_table(&s.values(), 1, false);
        for r in rows {
            assert!((r.ratio - PI * PI).abs() < 1e-12 * PI * PI);
        }
    }

    #[test]
    fn scaled_interval_ratios_divide_by_four() {
        let dom1 = interval(BoundaryCondition::Dirichlet);
        let dom2 = DomainSpec::interval(2.0, BoundaryCondition::Dirichlet).unwrap();
        let r1 = weyl_ratio_table(
            &continuous_spectrum(&dom1, 20).unwrap().values(),
            1,
            false,
        );
        let r2 = weyl_ratio_table(
            &continuous_spectrum(&dom2, 20).unwrap().values(),
            1,
            false,
        );
        for (a, b) in r1.iter().zip(&r2) {
            assert!((a.ratio / b.ratio - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn neumann_zero_mode_excluded_from_ratios() {
        let s = continuous_spectrum(&interval(BoundaryCondition::Neumann), 10).unwrap();
        let rows = weyl_ratio_table(&s.values(), 1, true);
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].k, 1);
        assert!((rows[0].lambda - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn constant_coefficient_scaling_brackets_exactly() {
        // For alpha = c I the operator spectrum is c times the Laplacian
        // spectrum, so the Laplacian ratio extrema bracket the scaled
        // spectrum exactly after multiplication by c.
        let dom = DomainSpec::rectangle([1.0, 1.0], BoundaryCondition::Dirichlet).unwrap();
        let s = continuous_spectrum(&dom, 30).unwrap();
        let values = s.values();
        let c = 3.5;
        let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
        let base_rows = weyl_ratio_table(&values, 2, false);
        let scaled_rows = weyl_ratio_table(&scaled, 2, false);
        let (g0, g1) = ratio_extrema(&base_rows, 1, 30).unwrap();
        for (b, s) in base_rows.iter().zip(&scaled_rows) {
            assert!((s.ratio - c * b.ratio).abs() <= 1e-14 * s.ratio);
            assert!(s.ratio >= c * g0 * (1.0 - 1e-14));
            assert!(s.ratio <= c * g1 * (1.0 + 1e-14));
        }
    }
}
