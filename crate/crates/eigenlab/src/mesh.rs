//! Structured quasi-uniform simplicial meshes of the model domains and
//! their geometric metrics.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use crate::error::{Error, Result};

/// Point type shared across the crate; unused trailing coordinates are zero.
pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Rectangle,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Analytic domain descriptor: a tensor-product domain (0, L_1) x ... x (0, L_d)
/// with one boundary condition on the whole boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub lengths: Vec<f64>,
    pub bc: BoundaryCondition,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, lengths: Vec<f64>, bc: BoundaryCondition) -> Result<Self> {
        let d = match kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
            DomainKind::Box => 3,
        };
        if lengths.len() != d {
            return Err(Error::InvalidArgument(format!(
                "domain dimension {} needs {} lengths, got {}",
                d,
                d,
                lengths.len()
            )));
        }
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidArgument(
                "all side lengths must be positive".into(),
            ));
        }
        Ok(Self { kind, lengths, bc })
    }

    pub fn interval(length: f64, bc: BoundaryCondition) -> Result<Self> {
        Self::new(DomainKind::Interval, vec![length], bc)
    }

    pub fn rectangle(lengths: [f64; 2], bc: BoundaryCondition) -> Result<Self> {
        Self::new(DomainKind::Rectangle, lengths.to_vec(), bc)
    }

    pub fn cuboid(lengths: [f64; 3], bc: BoundaryCondition) -> Result<Self> {
        Self::new(DomainKind::Box, lengths.to_vec(), bc)
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// Conforming simplicial complex with boundary tags and a DOF numbering for
/// the domain's boundary condition.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    /// Vertex coordinates, flat with stride `dim`, lexicographic by coordinates.
    vertices: Vec<f64>,
    /// Cell vertex indices, flat with stride `dim + 1`.
    cells: Vec<usize>,
    boundary_vertices: BTreeSet<usize>,
    bc: BoundaryCondition,
    dof_map: DofMap,
}

/// Bijection between free vertices and contiguous DOF indices. Dirichlet
/// keeps interior vertices only; Neumann keeps all.
#[derive(Debug, Clone)]
pub struct DofMap {
    vertex_to_dof: Vec<Option<usize>>,
    dof_to_vertex: Vec<usize>,
}

impl DofMap {
    fn new(n_vertices: usize, eliminated: &BTreeSet<usize>) -> Self {
        let mut vertex_to_dof = vec![None; n_vertices];
        let mut dof_to_vertex = Vec::with_capacity(n_vertices - eliminated.len());
        for v in 0..n_vertices {
            if !eliminated.contains(&v) {
                vertex_to_dof[v] = Some(dof_to_vertex.len());
                dof_to_vertex.push(v);
            }
        }
        Self {
            vertex_to_dof,
            dof_to_vertex,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_to_vertex.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.vertex_to_dof[v]
    }

    pub fn vertex_of_dof(&self, dof: usize) -> usize {
        self.dof_to_vertex[dof]
    }
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vertex_point(&self, i: usize) -> Point {
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(self.vertex(i));
        p
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * (self.dim + 1)..(c + 1) * (self.dim + 1)]
    }

    pub fn boundary_vertices(&self) -> &BTreeSet<usize> {
        &self.boundary_vertices
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dof_map
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_map.n_dofs()
    }

    /// Signed volume of cell `c` (positive for correctly oriented cells).
    pub fn cell_signed_volume(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        let p0 = self.vertex(cell[0]);
        match self.dim {
            1 => self.vertex(cell[1])[0] - p0[0],
            2 => {
                let p1 = self.vertex(cell[1]);
                let p2 = self.vertex(cell[2]);
                let ux = p1[0] - p0[0];
                let uy = p1[1] - p0[1];
                let vx = p2[0] - p0[0];
                let vy = p2[1] - p0[1];
                0.5 * (ux * vy - uy * vx)
            }
            3 => {
                let p1 = self.vertex(cell[1]);
                let p2 = self.vertex(cell[2]);
                let p3 = self.vertex(cell[3]);
                let u = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
                let v = [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]];
                let w = [p3[0] - p0[0], p3[1] - p0[1], p3[2] - p0[2]];
                let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
                    + u[2] * (v[0] * w[1] - v[1] * w[0]);
                det / 6.0
            }
            _ => unreachable!(),
        }
    }

    pub fn cell_barycenter(&self, c: usize) -> Point {
        let cell = self.cell(c);
        let mut p = [0.0; 3];
        for &v in cell {
            let coords = self.vertex(v);
            for (k, &x) in coords.iter().enumerate() {
                p[k] += x;
            }
        }
        for x in p.iter_mut() {
            *x /= cell.len() as f64;
        }
        p
    }

    /// Every interior facet must be shared by exactly two cells, every
    /// boundary facet by exactly one, and the once-counted facets must cover
    /// exactly the tagged boundary vertices.
    pub fn validate_conformity(&self) -> Result<()> {
        let d = self.dim;
        let mut facets: HashMap<Vec<usize>, usize> = HashMap::new();
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for omit in 0..=d {
                let mut f: Vec<usize> = cell
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != omit)
                    .map(|(_, &v)| v)
                    .collect();
                f.sort_unstable();
                *facets.entry(f).or_insert(0) += 1;
            }
        }
        let mut boundary_seen: BTreeSet<usize> = BTreeSet::new();
        for (f, count) in &facets {
            match count {
                1 => boundary_seen.extend(f.iter().copied()),
                2 => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "facet {:?} shared by {} cells",
                        f, count
                    )))
                }
            }
        }
        if boundary_seen != self.boundary_vertices {
            return Err(Error::InvalidMesh(
                "boundary tags do not match once-counted facets".into(),
            ));
        }
        Ok(())
    }

    /// Plain-text dump: VERTICES / CELLS / BOUNDARY sections.
    pub fn write_dump<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "VERTICES")?;
        for v in 0..self.n_vertices() {
            let coords = self.vertex(v);
            let line: Vec<String> = coords.iter().map(|x| format!("{}", x)).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        writeln!(out, "CELLS")?;
        for c in 0..self.n_cells() {
            let line: Vec<String> = self.cell(c).iter().map(|v| format!("{}", v)).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        writeln!(out, "BOUNDARY")?;
        for v in &self.boundary_vertices {
            writeln!(out, "{}", v)?;
        }
        Ok(())
    }
}

/// Builds the structured mesh of `domain` with `n[i]` subdivisions along
/// axis `i`. Rectangles split every grid cell into two triangles by the same
/// diagonal direction; boxes use the six-tetrahedra Kuhn subdivision, which
/// is conforming across cube faces without parity alternation.
pub fn build_mesh(domain: &DomainSpec, n: &[usize]) -> Result<Mesh> {
    let d = domain.dim();
    if n.len() != d {
        return Err(Error::InvalidArgument(format!(
            "expected {} subdivision counts, got {}",
            d,
            n.len()
        )));
    }
    if n.contains(&0) {
        return Err(Error::InvalidArgument(
            "subdivision counts must be at least 1".into(),
        ));
    }
    let mesh = match d {
        1 => build_interval(domain, n[0]),
        2 => build_rectangle(domain, n[0], n[1]),
        3 => build_box(domain, n[0], n[1], n[2]),
        _ => unreachable!(),
    };
    Ok(mesh)
}

fn build_interval(domain: &DomainSpec, n: usize) -> Mesh {
    let l = domain.lengths[0];
    let vertices: Vec<f64> = (0..=n).map(|i| i as f64 * l / n as f64).collect();
    let mut cells = Vec::with_capacity(2 * n);
    for i in 0..n {
        cells.push(i);
        cells.push(i + 1);
    }
    let boundary_vertices: BTreeSet<usize> = [0, n].into_iter().collect();
    finish_mesh(1, vertices, cells, boundary_vertices, domain.bc)
}

fn build_rectangle(domain: &DomainSpec, nx: usize, ny: usize) -> Mesh {
    let (lx, ly) = (domain.lengths[0], domain.lengths[1]);
    let vid = |ix: usize, iy: usize| ix * (ny + 1) + iy;
    let mut vertices = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
    for ix in 0..=nx {
        for iy in 0..=ny {
            vertices.push(ix as f64 * lx / nx as f64);
            vertices.push(iy as f64 * ly / ny as f64);
        }
    }
    let mut cells = Vec::with_capacity(3 * 2 * nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let v00 = vid(ix, iy);
            let v10 = vid(ix + 1, iy);
            let v01 = vid(ix, iy + 1);
            let v11 = vid(ix + 1, iy + 1);
            // Both triangles take the diagonal v00 -> v11.
            cells.extend_from_slice(&[v00, v10, v11]);
            cells.extend_from_slice(&[v00, v11, v01]);
        }
    }
    let mut boundary_vertices = BTreeSet::new();
    for ix in 0..=nx {
        for iy in 0..=ny {
            if ix == 0 || ix == nx || iy == 0 || iy == ny {
                boundary_vertices.insert(vid(ix, iy));
            }
        }
    }
    finish_mesh(2, vertices, cells, boundary_vertices, domain.bc)
}

/// The six path permutations of the Kuhn subdivision, listed in
/// lexicographic order of the axis permutation.
const KUHN_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn build_box(domain: &DomainSpec, nx: usize, ny: usize, nz: usize) -> Mesh {
    let (lx, ly, lz) = (domain.lengths[0], domain.lengths[1], domain.lengths[2]);
    let vid = |ix: usize, iy: usize, iz: usize| (ix * (ny + 1) + iy) * (nz + 1) + iz;
    let mut vertices = Vec::with_capacity(3 * (nx + 1) * (ny + 1) * (nz + 1));
    for ix in 0..=nx {
        for iy in 0..=ny {
            for iz in 0..=nz {
                vertices.push(ix as f64 * lx / nx as f64);
                vertices.push(iy as f64 * ly / ny as f64);
                vertices.push(iz as f64 * lz / nz as f64);
            }
        }
    }
    let mut cells = Vec::with_capacity(4 * 6 * nx * ny * nz);
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                for perm in &KUHN_PERMUTATIONS {
                    // Walk from the low corner to the high corner along the
                    // permuted axes.
                    let mut corner = [ix, iy, iz];
                    let mut ids = [vid(corner[0], corner[1], corner[2]), 0, 0, 0];
                    for (step, &axis) in perm.iter().enumerate() {
                        corner[axis] += 1;
                        ids[step + 1] = vid(corner[0], corner[1], corner[2]);
                    }
                    // Odd permutations produce negative orientation; swap the
                    // last two vertices to fix the sign.
                    if perm_sign(perm) < 0 {
                        ids.swap(2, 3);
                    }
                    cells.extend_from_slice(&ids);
                }
            }
        }
    }
    let mut boundary_vertices = BTreeSet::new();
    for ix in 0..=nx {
        for iy in 0..=ny {
            for iz in 0..=nz {
                if ix == 0 || ix == nx || iy == 0 || iy == ny || iz == 0 || iz == nz {
                    boundary_vertices.insert(vid(ix, iy, iz));
                }
            }
        }
    }
    finish_mesh(3, vertices, cells, boundary_vertices, domain.bc)
}

fn perm_sign(p: &[usize; 3]) -> i32 {
    let mut sign = 1;
    for i in 0..3 {
        for j in (i + 1)..3 {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

fn finish_mesh(
    dim: usize,
    vertices: Vec<f64>,
    cells: Vec<usize>,
    boundary_vertices: BTreeSet<usize>,
    bc: BoundaryCondition,
) -> Mesh {
    let n_vertices = vertices.len() / dim;
    let eliminated = match bc {
        BoundaryCondition::Dirichlet => boundary_vertices.clone(),
        BoundaryCondition::Neumann => BTreeSet::new(),
    };
    let dof_map = DofMap::new(n_vertices, &eliminated);
    Mesh {
        dim,
        vertices,
        cells,
        boundary_vertices,
        bc,
        dof_map,
    }
}

/// DOF indices (vertex indices) eliminated by the boundary condition:
/// all boundary vertices for Dirichlet, none for Neumann.
pub fn boundary_dofs(mesh: &Mesh, bc: BoundaryCondition) -> BTreeSet<usize> {
    match bc {
        BoundaryCondition::Dirichlet => mesh.boundary_vertices().clone(),
        BoundaryCondition::Neumann => BTreeSet::new(),
    }
}

/// Per-cell geometric quantities and their mesh-level aggregates.
#[derive(Debug, Clone)]
pub struct CellMetrics {
    /// Euclidean diameter of the cell.
    pub diameter: f64,
    /// Volume measure |T|^(1/d).
    pub volume_measure: f64,
    /// Inscribed-ball diameter 2 sup{r : B(x, r) in T}.
    pub inball_diameter: f64,
    pub volume: f64,
}

#[derive(Debug, Clone)]
pub struct MeshMetrics {
    /// Largest cell diameter.
    pub h: f64,
    pub per_cell: Vec<CellMetrics>,
    /// max_T h / inball_diameter(T).
    pub quasi_uniformity: f64,
    pub total_volume: f64,
}

pub fn mesh_metrics(mesh: &Mesh) -> Result<MeshMetrics> {
    let d = mesh.dim();
    let mut per_cell = Vec::with_capacity(mesh.n_cells());
    let mut h = 0.0f64;
    let mut total_volume = 0.0;
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_signed_volume(c);
        if !(vol > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "cell {} has non-positive volume {}",
                c, vol
            )));
        }
        let cell = mesh.cell(c);
        let mut diam: f64 = 0.0;
        for i in 0..cell.len() {
            for j in (i + 1)..cell.len() {
                let pi = mesh.vertex(cell[i]);
                let pj = mesh.vertex(cell[j]);
                let dist2: f64 = pi
                    .iter()
                    .zip(pj)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum();
                diam = diam.max(dist2.sqrt());
            }
        }
        let surface = cell_surface_measure(mesh, c);
        // r = d |T| / |boundary of T|; the inscribed-ball diameter is 2r.
        let inball = 2.0 * d as f64 * vol / surface;
        per_cell.push(CellMetrics {
            diameter: diam,
            volume_measure: vol.powf(1.0 / d as f64),
            inball_diameter: inball,
            volume: vol,
        });
        h = h.max(diam);
        total_volume += vol;
    }
    let quasi_uniformity = per_cell
        .iter()
        .map(|m| h / m.inball_diameter)
        .fold(0.0f64, f64::max);
    Ok(MeshMetrics {
        h,
        per_cell,
        quasi_uniformity,
        total_volume,
    })
}

/// Measure of the boundary of a cell: 2 points in 1D (counting measure),
/// perimeter in 2D, face area sum in 3D.
fn cell_surface_measure(mesh: &Mesh, c: usize) -> f64 {
    let d = mesh.dim();
    let cell = mesh.cell(c);
    match d {
        1 => 2.0,
        2 => {
            let mut per = 0.0;
            for i in 0..3 {
                let a = mesh.vertex(cell[i]);
                let b = mesh.vertex(cell[(i + 1) % 3]);
                per += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            }
            per
        }
        3 => {
            let mut area = 0.0;
            for omit in 0..4 {
                let face: Vec<&[f64]> = (0..4)
                    .filter(|&k| k != omit)
                    .map(|k| mesh.vertex(cell[k]))
                    .collect();
                let u = [
                    face[1][0] - face[0][0],
                    face[1][1] - face[0][1],
                    face[1][2] - face[0][2],
                ];
                let v = [
                    face[2][0] - face[0][0],
                    face[2][1] - face[0][1],
                    face[2][2] - face[0][2],
                ];
                let cx = u[1] * v[2] - u[2] * v[1];
                let cy = u[2] * v[0] - u[0] * v[2];
                let cz = u[0] * v[1] - u[1] * v[0];
                area += 0.5 * (cx * cx + cy * cy + cz * cz).sqrt();
            }
            area
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interval_basic_counts() {
        let dom = DomainSpec::interval(1.0, BoundaryCondition::Dirichlet).unwrap();
        let mesh = build_mesh(&dom, &[4]).unwrap();
        assert_eq!(mesh.n_vertices(), 5);
        assert_eq!(mesh.n_cells(), 4);
        assert_eq!(
            mesh.boundary_vertices().iter().copied().collect::<Vec<_>>(),
            vec![0, 4]
        );
        assert_eq!(mesh.n_dofs(), 3);
        mesh.validate_conformity().unwrap();
    }

    #[test]
    fn interval_neumann_keeps_all_dofs() {
        let dom = DomainSpec::interval(1.0, BoundaryCondition::Neumann).unwrap();
        let mesh = build_mesh(&dom, &[4]).unwrap();
        assert_eq!(mesh.n_dofs(), 5);
        assert!(boundary_dofs(&mesh, BoundaryCondition::Neumann).is_empty());
        assert_eq!(
            boundary_dofs(&mesh, BoundaryCondition::Dirichlet).len(),
            2
        );
    }

    #[test]
    fn rectangle_two_by_two() {
        let dom = DomainSpec::rectangle([1.0, 1.0], BoundaryCondition::Dirichlet).unwrap();
        let mesh = build_mesh(&dom, &[2, 2]).unwrap();
        assert_eq!(mesh.n_vertices(), 9);
        assert_eq!(mesh.n_cells(), 8);
        assert_eq!(mesh.boundary_vertices().len(), 8);
        assert_eq!(mesh.n_dofs(), 1);
        let interior = mesh.dof_map().vertex_of_dof(0);
        assert_eq!(mesh.vertex(interior), &[0.5, 0.5]);
        mesh.validate_conformity().unwrap();
    }

    #[test]
    fn box_two_cubed_is_conforming() {
        let dom = DomainSpec::cuboid([1.0, 1.0, 1.0], BoundaryCondition::Dirichlet).unwrap();
        let mesh = build_mesh(&dom, &[2, 2, 2]).unwrap();
        assert_eq!(mesh.n_vertices(), 27);
        assert_eq!(mesh.n_cells(), 48);
        assert_eq!(mesh.n_dofs(), 1);
        mesh.validate_conformity().unwrap();
        for c in 0..mesh.n_cells() {
            assert!(mesh.cell_signed_volume(c) > 0.0);
        }
    }

    #[test]
    fn zero_subdivision_rejected() {
        let dom = DomainSpec::interval(1.0, BoundaryCondition::Dirichlet).unwrap();
        assert!(build_mesh(&dom, &[0]).is_err());
    }

    #[test]
    fn interval_metrics() {
        let dom = DomainSpec::interval(1.0, BoundaryCondition::Dirichlet).unwrap();
        let mesh = build_mesh(&dom, &[4]).unwrap();
        let m = mesh_metrics(&mesh).unwrap();
        assert!((m.h - 0.25).abs() < 1e-15);
        assert!((m.quasi_uniformity - 1.0).abs() < 1e-15);
        assert!((m.total_volume - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_square_metrics_match_hand_geometry() {
        let dom = DomainSpec::rectangle([1.0, 1.0], BoundaryCondition::Dirichlet).unwrap();
        let mesh = build_mesh(&dom, &[2, 2]).unwrap();
        let m = mesh_metrics(&mesh).unwrap();
        let expected_h = std::f64::consts::SQRT_2 / 2.0;
        // Right isoceles triangle with legs 1/2: inball diameter a + b - c.
        let expected_inball = 0.5 + 0.5 - expected_h;
        assert!((m.h - expected_h).abs() < 1e-14);
        for cm in &m.per_cell {
            assert!((cm.inball_diameter - expected_inball).abs() < 1e-14);
            assert!(cm.inball_diameter <= cm.volume_measure + 1e-14);
            assert!(cm.volume_measure <= cm.diameter + 1e-14);
        }
        assert!((m.quasi_uniformity - (1.0 + std::f64::consts::SQRT_2)).abs() < 1e-13);
    }

    #[test]
    fn scaling_doubles_length_metrics() {
        let dom1 = DomainSpec::rectangle([1.0, 1.0], BoundaryCondition::Dirichlet).unwrap();
        let dom2 = DomainSpec::rectangle([2.0, 2.0], BoundaryCondition::Dirichlet).unwrap();
        let m1 = mesh_metrics(&build_mesh(&dom1, &[3, 3]).unwrap()).unwrap();
        let m2 = mesh_metrics(&build_mesh(&dom2, &[3, 3]).unwrap()).unwrap();
        assert!((m2.h - 2.0 * m1.h).abs() < 1e-14);
        for (a, b) in m1.per_cell.iter().zip(&m2.per_cell) {
            assert!((b.diameter - 2.0 * a.diameter).abs() < 1e-14);
            assert!((b.inball_diameter - 2.0 * a.inball_diameter).abs() < 1e-14);
            assert!((b.volume_measure - 2.0 * a.volume_measure).abs() < 1e-14);
        }
        assert!((m2.quasi_uniformity - m1.quasi_uniformity).abs() < 1e-13);
    }

    #[test]
    fn quasi_uniformity_stable_under_refinement() {
        for (lengths, n_base) in [
            (vec![1.0], vec![5usize]),
            (vec![1.0, 2.0], vec![3, 4]),
            (vec![1.0, 1.0, 1.5], vec![2, 2, 3]),
        ] {
            let kind = match lengths.len() {
                1 => DomainKind::Interval,
                2 => DomainKind::Rectangle,
                _ => DomainKind::Box,
            };
            let dom = DomainSpec::new(kind, lengths, BoundaryCondition::Dirichlet).unwrap();
            let n2: Vec<usize> = n_base.iter().map(|&x| 2 * x).collect();
            let m1 = mesh_metrics(&build_mesh(&dom, &n_base).unwrap()).unwrap();
            let m2 = mesh_metrics(&build_mesh(&dom, &n2).unwrap()).unwrap();
            assert!(
                (m1.quasi_uniformity - m2.quasi_uniformity).abs() < 1e-12,
                "quasi-uniformity drifted: {} vs {}",
                m1.quasi_uniformity,
                m2.quasi_uniformity
            );
        }
    }

    #[test]
    fn mesh_dump_sections() {
        let dom = DomainSpec::interval(1.0, BoundaryCondition::Dirichlet).unwrap();
        let mesh = build_mesh(&dom, &[2]).unwrap();
        let mut buf = Vec::new();
        mesh.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("VERTICES\n"));
        assert!(text.contains("\nCELLS\n"));
        assert!(text.contains("\nBOUNDARY\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn structured_meshes_are_conforming_with_exact_volume(
            dim in 1usize..=3,
            n1 in 1usize..5,
            n2 in 1usize..5,
            n3 in 1usize..4,
            lx in 0.5f64..3.0,
            ly in 0.5f64..3.0,
            lz in 0.5f64..3.0,
        ) {
            let (kind, lengths, n): (DomainKind, Vec<f64>, Vec<usize>) = match dim {
                1 => (DomainKind::Interval, vec![lx], vec![n1]),
                2 => (DomainKind::Rectangle, vec![lx, ly], vec![n1, n2]),
                _ => (DomainKind::Box, vec![lx, ly, lz], vec![n1, n2, n3]),
            };
            let dom = DomainSpec::new(kind, lengths, BoundaryCondition::Dirichlet).unwrap();
            let mesh = build_mesh(&dom, &n).unwrap();
            prop_assert!(mesh.validate_conformity().is_ok());
            let metrics = mesh_metrics(&mesh).unwrap();
            let vol = dom.volume();
            prop_assert!((metrics.total_volume - vol).abs() <= 1e-12 * vol);
            for cm in &metrics.per_cell {
                prop_assert!(cm.inball_diameter <= cm.volume_measure + 1e-12);
                prop_assert!(cm.volume_measure <= cm.diameter + 1e-12);
                prop_assert!(cm.diameter <= metrics.h + 1e-12);
            }
        }
    }
}
