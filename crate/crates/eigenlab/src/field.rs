//! Scalar fields on the domain: analytic functions with gradients, linear
//! combinations, and piecewise-linear finite element functions.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// A scalar function on the closure of the domain with an analytic gradient.
pub trait Field {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    /// Characteristic frequency (sqrt of the Rayleigh quotient scale) used
    /// to pick quadrature subdivisions; zero for smooth-at-mesh-scale fields.
    fn frequency_hint(&self) -> f64 {
        0.0
    }
}

pub struct ConstantField(pub f64);

impl Field for ConstantField {
    fn value(&self, _x: &Point) -> f64 {
        self.0
    }
    fn gradient(&self, _x: &Point) -> Point {
        [0.0; 3]
    }
}

/// Field defined by closures.
pub struct FnField<V, G>
where
    V: Fn(&Point) -> f64,
    G: Fn(&Point) -> Point,
{
    value: V,
    gradient: G,
    frequency: f64,
}

impl<V, G> FnField<V, G>
where
    V: Fn(&Point) -> f64,
    G: Fn(&Point) -> Point,
{
    pub fn new(value: V, gradient: G, frequency: f64) -> Self {
        Self {
            value,
            gradient,
            frequency,
        }
    }
}

impl<V, G> Field for FnField<V, G>
where
    V: Fn(&Point) -> f64,
    G: Fn(&Point) -> Point,
{
    fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &Point) -> Point {
        (self.gradient)(x)
    }
    fn frequency_hint(&self) -> f64 {
        self.frequency
    }
}

/// Weighted sum of fields.
pub struct LinearCombination {
    pub terms: Vec<(f64, Box<dyn Field>)>,
}

impl Field for LinearCombination {
    fn value(&self, x: &Point) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x)).sum()
    }
    fn gradient(&self, x: &Point) -> Point {
        let mut g = [0.0; 3];
        for (c, f) in &self.terms {
            let gf = f.gradient(x);
            for k in 0..3 {
                g[k] += c * gf[k];
            }
        }
        g
    }
    fn frequency_hint(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, f)| f.frequency_hint())
            .fold(0.0, f64::max)
    }
}

/// P1 finite element function given by vertex values. Evaluation locates the
/// containing cell by scanning barycentric coordinates; intended for tests
/// and projections of coarse functions, not hot loops.
pub struct FeField<'a> {
    mesh: &'a Mesh,
    vertex_values: Vec<f64>,
}

impl<'a> FeField<'a> {
    pub fn new(mesh: &'a Mesh, vertex_values: Vec<f64>) -> Result<Self> {
        if vertex_values.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "FE field: {} vertex values for {} vertices",
                vertex_values.len(),
                mesh.n_vertices()
            )));
        }
        Ok(Self {
            mesh,
            vertex_values,
        })
    }

    /// Nodal hat function of one vertex.
    pub fn hat(mesh: &'a Mesh, vertex: usize) -> Self {
        let mut values = vec![0.0; mesh.n_vertices()];
        values[vertex] = 1.0;
        Self {
            mesh,
            vertex_values: values,
        }
    }

    /// Vertex values from free-DOF coefficients (eliminated vertices zero).
    pub fn from_dofs(mesh: &'a Mesh, coeffs: &[f64]) -> Result<Self> {
        let dofs = mesh.dof_map();
        if coeffs.len() != dofs.n_dofs() {
            return Err(Error::DimensionMismatch(format!(
                "FE field: {} coefficients for {} DOFs",
                coeffs.len(),
                dofs.n_dofs()
            )));
        }
        let mut values = vec![0.0; mesh.n_vertices()];
        for (dof, &c) in coeffs.iter().enumerate() {
            values[dofs.vertex_of_dof(dof)] = c;
        }
        Ok(Self {
            mesh,
            vertex_values: values,
        })
    }

    fn locate(&self, x: &Point) -> Option<(usize, [f64; 4])> {
        const TOL: f64 = 1e-10;
        let d = self.mesh.dim();
        for c in 0..self.mesh.n_cells() {
            let lambda = barycentric(self.mesh, c, x);
            if lambda[..=d].iter().all(|&l| l >= -TOL) {
                return Some((c, lambda));
            }
        }
        None
    }
}

/// Barycentric coordinates of `x` in cell `c` (first dim+1 entries).
pub fn barycentric(mesh: &Mesh, c: usize, x: &Point) -> [f64; 4] {
    let d = mesh.dim();
    let cell = mesh.cell(c);
    let p0 = mesh.vertex(cell[0]);
    let grads = crate::assembly::p1_gradients(mesh, c).0;
    let mut lambda = [0.0; 4];
    let mut sum = 0.0;
    for i in 1..=d {
        let mut l = 0.0;
        for k in 0..d {
            l += grads[i][k] * (x[k] - p0[k]);
        }
        lambda[i] = l;
        sum += l;
    }
    lambda[0] = 1.0 - sum;
    lambda
}

impl Field for FeField<'_> {
    fn value(&self, x: &Point) -> f64 {
        let (c, lambda) = match self.locate(x) {
            Some(hit) => hit,
            None => return 0.0,
        };
        let cell = self.mesh.cell(c);
        cell.iter()
            .enumerate()
            .map(|(i, &v)| lambda[i] * self.vertex_values[v])
            .sum()
    }

    fn gradient(&self, x: &Point) -> Point {
        let (c, _) = match self.locate(x) {
            Some(hit) => hit,
            None => return [0.0; 3],
        };
        let cell = self.mesh.cell(c);
        let grads = crate::assembly::p1_gradients(self.mesh, c).0;
        let mut g = [0.0; 3];
        for (i, &v) in cell.iter().enumerate() {
            for k in 0..3 {
                g[k] += self.vertex_values[v] * grads[i][k];
            }
        }
        g
    }
}
