//! Composite quadrature on reference simplices.
//!
//! Base rules are collapsed tensor-product Gauss rules of a requested
//! polynomial degree; composite refinement subdivides the reference simplex
//! into `s^d` congruent sub-simplices (via the self-refining Kuhn
//! triangulation in 2D/3D) so oscillatory integrands stay resolved on
//! coarse meshes.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Quadrature request: base polynomial degree plus per-element subdivisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub degree: usize,
    pub subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            degree: 4,
            subdivisions: 1,
        }
    }
}

impl QuadratureSpec {
    pub fn new(degree: usize, subdivisions: usize) -> Result<Self> {
        if degree == 0 || subdivisions == 0 {
            return Err(Error::InvalidArgument(
                "quadrature degree and subdivisions must be at least 1".into(),
            ));
        }
        Ok(Self {
            degree,
            subdivisions,
        })
    }

    /// Chooses subdivisions so that `sqrt_lambda * h / s <= 1` for the
    /// highest-frequency integrand.
    pub fn for_frequency(sqrt_lambda: f64, h: f64, degree: usize) -> Self {
        let s = (sqrt_lambda * h).ceil().max(1.0) as usize;
        Self {
            degree,
            subdivisions: s,
        }
    }

    /// True when the spec resolves a wave of frequency `sqrt_lambda` on
    /// elements of diameter `h`.
    pub fn resolves(&self, sqrt_lambda: f64, h: f64) -> bool {
        sqrt_lambda * h <= self.subdivisions as f64 * (1.0 + 1e-12)
    }
}

/// Quadrature points in reference-simplex coordinates with weights that sum
/// to one; integrals scale by the physical cell volume.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub dim: usize,
    pub points: Vec<(Point, f64)>,
}

/// Gauss-Legendre nodes and weights on [0, 1], weights summing to one.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Collapsed Gauss rule on the reference simplex, exact for polynomials of
/// total degree `degree`. Weights are normalized to sum to one.
fn base_rule(dim: usize, degree: usize) -> SimplexRule {
    let g = gauss_legendre_unit((degree + dim + 2) / 2);
    let mut points = Vec::new();
    match dim {
        1 => {
            for &(u, wu) in &g {
                points.push(([u, 0.0, 0.0], wu));
            }
        }
        2 => {
            // x = u, y = v (1 - u); Jacobian (1 - u); area of the simplex 1/2.
            for &(u, wu) in &g {
                for &(v, wv) in &g {
                    let w = wu * wv * (1.0 - u) * 2.0;
                    points.push(([u, v * (1.0 - u), 0.0], w));
                }
            }
        }
        3 => {
            // x = u, y = v (1 - u), z = w (1 - u)(1 - v); volume 1/6.
            for &(u, wu) in &g {
                for &(v, wv) in &g {
                    for &(t, wt) in &g {
                        let w = wu * wv * wt * (1.0 - u) * (1.0 - u) * (1.0 - v) * 6.0;
                        points.push(([
                            u,
                            v * (1.0 - u),
                            t * (1.0 - u) * (1.0 - v),
                        ], w));
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    SimplexRule { dim, points }
}

/// Sub-simplices of the uniform `s`-fold refinement of the reference
/// simplex, as vertex tuples in reference coordinates. All have volume
/// |ref| / s^d.
fn refinement_simplices(dim: usize, s: usize) -> Vec<Vec<Point>> {
    let sf = s as f64;
    match dim {
        1 => (0..s)
            .map(|i| {
                vec![
                    [i as f64 / sf, 0.0, 0.0],
                    [(i + 1) as f64 / sf, 0.0, 0.0],
                ]
            })
            .collect(),
        2 => {
            let mut out = Vec::with_capacity(s * s);
            for i in 0..s {
                for j in 0..(s - i) {
                    let (x0, y0) = (i as f64 / sf, j as f64 / sf);
                    let step = 1.0 / sf;
                    out.push(vec![
                        [x0, y0, 0.0],
                        [x0 + step, y0, 0.0],
                        [x0, y0 + step, 0.0],
                    ]);
                    if i + j < s - 1 {
                        out.push(vec![
                            [x0 + step, y0, 0.0],
                            [x0 + step, y0 + step, 0.0],
                            [x0, y0 + step, 0.0],
                        ]);
                    }
                }
            }
            out
        }
        3 => kuhn_refinement_3d(s),
        _ => unreachable!(),
    }
}

/// The Kuhn simplex {1 >= a >= b >= c >= 0} is exactly tiled by the Kuhn
/// tetrahedra of the s-fold subdivided unit cube that lie inside it; mapping
/// its vertices onto the reference simplex carries that tiling over.
fn kuhn_refinement_3d(s: usize) -> Vec<Vec<Point>> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    // Affine image of Kuhn coordinates (a, b, c) with a >= b >= c in the
    // reference simplex: vertices (0,0,0), (1,0,0), (1,1,0), (1,1,1) map to
    // 0, e1, e2, e3, i.e. x = a - b, y = b - c, z = c.
    let to_ref = |p: [usize; 3]| -> Point {
        let sf = s as f64;
        [
            (p[0] - p[1]) as f64 / sf,
            (p[1] - p[2]) as f64 / sf,
            p[2] as f64 / sf,
        ]
    };
    let mut out = Vec::with_capacity(s * s * s);
    for a in 0..s {
        for b in 0..s {
            for c in 0..s {
                'perm: for perm in &PERMS {
                    let mut corner = [a, b, c];
                    let mut verts = [[0usize; 3]; 4];
                    verts[0] = corner;
                    for (step, &axis) in perm.iter().enumerate() {
                        corner[axis] += 1;
                        verts[step + 1] = corner;
                    }
                    for v in &verts {
                        if !(v[0] >= v[1] && v[1] >= v[2]) {
                            continue 'perm;
                        }
                    }
                    out.push(verts.iter().map(|&v| to_ref(v)).collect());
                }
            }
        }
    }
    debug_assert_eq!(out.len(), s * s * s);
    out
}

/// Composite rule for a [`QuadratureSpec`], in reference coordinates with
/// weights summing to one.
pub fn simplex_rule(dim: usize, spec: &QuadratureSpec) -> SimplexRule {
    let base = base_rule(dim, spec.degree);
    let s = spec.subdivisions;
    if s == 1 {
        return base;
    }
    let subs = refinement_simplices(dim, s);
    let scale = 1.0 / subs.len() as f64;
    let mut points = Vec::with_capacity(base.points.len() * subs.len());
    for sub in &subs {
        let p0 = sub[0];
        for &(xi, w) in &base.points {
            let mut p = p0;
            for (i, v) in sub.iter().skip(1).enumerate() {
                for k in 0..3 {
                    p[k] += xi[i] * (v[k] - p0[k]);
                }
            }
            points.push((p, w * scale));
        }
    }
    SimplexRule { dim, points }
}

impl SimplexRule {
    /// Physical quadrature points and weights for cell `c`; weights sum to
    /// the cell volume.
    pub fn cell_points(&self, mesh: &Mesh, c: usize) -> Vec<(Point, f64)> {
        let d = mesh.dim();
        let cell = mesh.cell(c);
        let p0 = mesh.vertex_point(cell[0]);
        let vol = mesh.cell_signed_volume(c);
        self.points
            .iter()
            .map(|&(xi, w)| {
                let mut x = p0;
                for i in 0..d {
                    let pi = mesh.vertex(cell[i + 1]);
                    for k in 0..d {
                        x[k] += xi[i] * (pi[k] - p0[k]);
                    }
                }
                (x, w * vol)
            })
            .collect()
    }
}

/// Integrates `f` over the whole mesh with the given rule.
pub fn integrate<F: FnMut(usize, &Point) -> f64>(
    mesh: &Mesh,
    rule: &SimplexRule,
    mut f: F,
) -> f64 {
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        for (x, w) in rule.cell_points(mesh, c) {
            acc += w * f(c, &x);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, BoundaryCondition, DomainSpec};

    #[test]
    fn gauss_nodes_integrate_monomials() {
        for n in 1..=8 {
            let rule = gauss_legendre_unit(n);
            for p in 0..(2 * n) {
                let val: f64 = rule.iter().map(|&(x, w)| w * x.powi(p as i32)).sum();
                let exact = 1.0 / (p as f64 + 1.0);
                assert!(
                    (val - exact).abs() < 1e-14,
                    "n={} p={}: {} vs {}",
                    n,
                    p,
                    val,
                    exact
                );
            }
        }
    }

    fn monomial_exact(dim: usize, e: [u32; 3]) -> f64 {
        // int over reference simplex of x^a y^b z^c = a! b! c! / (a+b+c+d)!
        let fact = |k: u32| (1..=k as u64).product::<u64>() as f64;
        let num = fact(e[0]) * fact(e[1]) * fact(e[2]);
        let den = (1..=(e[0] + e[1] + e[2] + dim as u32) as u64).product::<u64>() as f64;
        num / den
    }

    #[test]
    fn base_rules_are_exact_to_degree() {
        for dim in 1..=3usize {
            for degree in [1usize, 2, 4, 6] {
                let spec = QuadratureSpec::new(degree, 1).unwrap();
                let rule = simplex_rule(dim, &spec);
                let wsum: f64 = rule.points.iter().map(|p| p.1).sum();
                assert!((wsum - 1.0).abs() < 1e-13);
                let ref_vol = 1.0
                    / match dim {
                        1 => 1.0,
                        2 => 2.0,
                        _ => 6.0,
                    };
                for a in 0..=degree as u32 {
                    for b in 0..=(degree as u32 - a) {
                        for c in 0..=(degree as u32 - a - b) {
                            if (dim < 3 && c > 0) || (dim < 2 && b > 0) {
                                continue;
                            }
                            let val: f64 = rule
                                .points
                                .iter()
                                .map(|&(p, w)| {
                                    w * p[0].powi(a as i32)
                                        * p[1].powi(b as i32)
                                        * p[2].powi(c as i32)
                                })
                                .sum();
                            // weights sum to one <=> rule integrates against
                            // measure |ref|; rescale to the exact integral.
                            let exact = monomial_exact(dim, [a, b, c]) / ref_vol;
                            assert!(
                                (val - exact).abs() < 1e-12,
                                "dim={} deg={} mono=({}, {}, {}): {} vs {}",
                                dim,
                                degree,
                                a,
                                b,
                                c,
                                val,
                                exact
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn composite_rules_preserve_exactness() {
        for dim in 1..=3usize {
            for s in [2usize, 3] {
                let spec = QuadratureSpec::new(3, s).unwrap();
                let rule = simplex_rule(dim, &spec);
                let wsum: f64 = rule.points.iter().map(|p| p.1).sum();
                assert!((wsum - 1.0).abs() < 1e-12, "dim={} s={}", dim, s);
                // linear monomial check
                let ref_vol = 1.0
                    / match dim {
                        1 => 1.0,
                        2 => 2.0,
                        _ => 6.0,
                    };
                let val: f64 = rule.points.iter().map(|&(p, w)| w * p[0]).sum();
                let exact = monomial_exact(dim, [1, 0, 0]) / ref_vol;
                assert!((val - exact).abs() < 1e-12);
                // quadratic cross term where applicable
                if dim >= 2 {
                    let val: f64 = rule.points.iter().map(|&(p, w)| w * p[0] * p[1]).sum();
                    let exact = monomial_exact(dim, [1, 1, 0]) / ref_vol;
                    assert!((val - exact).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mesh_integration_of_one_gives_volume() {
        let dom = DomainSpec::cuboid([1.0, 2.0, 0.5], BoundaryCondition::Neumann).unwrap();
        let mesh = build_mesh(&dom, &[2, 3, 2]).unwrap();
        let rule = simplex_rule(3, &QuadratureSpec::default());
        let vol = integrate(&mesh, &rule, |_, _| 1.0);
        assert!((vol - 1.0 * 2.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integrand_needs_and_gets_subdivision() {
        // int_0^1 sin(12 pi x)^2 dx = 1/2; one degree-4 cell misses it badly,
        // the frequency-matched composite rule nails it.
        let dom = DomainSpec::interval(1.0, BoundaryCondition::Neumann).unwrap();
        let mesh = build_mesh(&dom, &[2]).unwrap();
        let f = |_: usize, x: &crate::mesh::Point| (12.0 * std::f64::consts::PI * x[0]).sin().powi(2);
        let coarse = integrate(&mesh, &simplex_rule(1, &QuadratureSpec::default()), f);
        let spec = QuadratureSpec::for_frequency(12.0 * std::f64::consts::PI, 0.5, 4);
        assert!(spec.resolves(12.0 * std::f64::consts::PI, 0.5));
        let fine = integrate(&mesh, &simplex_rule(1, &spec), f);
        assert!((coarse - 0.5).abs() > 1e-3);
        assert!((fine - 0.5).abs() < 1e-10);
    }

    #[test]
    fn rejects_zero_degree() {
        assert!(QuadratureSpec::new(0, 1).is_err());
        assert!(QuadratureSpec::new(4, 0).is_err());
    }
}
