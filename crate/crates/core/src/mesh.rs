//! Conforming simplicial triangulations of polygons.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::quadrature::TriangleRule;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cell {cell} has non-positive signed area {area:e}")]
    Orientation { cell: usize, area: f64 },
    #[error("cell {cell} references vertex {vertex} but the mesh has {count} vertices")]
    VertexIndex { cell: usize, vertex: usize, count: usize },
    #[error("edge ({0}, {1}) is shared by more than two cells")]
    NonManifoldEdge(usize, usize),
    #[error("vertex {vertex} hangs on boundary-like edge ({a}, {b})")]
    HangingNode { vertex: usize, a: usize, b: usize },
    #[error("boundary edge list does not match the mesh topology: {0}")]
    BoundaryMismatch(String),
    #[error("malformed mesh file at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub marker: u32,
}

/// Per-cell size data: diameter `h_K`, inradius `rho_K`, area `|K|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSize {
    pub diameter: f64,
    pub inradius: f64,
    pub area: f64,
}

/// Integration region for [`Triangulation::mean_over`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Cell(usize),
    /// The neighbourhood `S_K` of a cell.
    Patch(usize),
    Domain,
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    /// Local edge `i` of a cell is the one opposite local vertex `i`.
    cell_edges: Vec<[usize; 3]>,
    edge_cells: Vec<Vec<usize>>,
    vertex_cells: Vec<Vec<usize>>,
    cell_sizes: Vec<CellSize>,
    patches: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    boundary_edge_flag: Vec<bool>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Triangulation {
    /// Builds and validates a triangulation.
    ///
    /// With `boundary = None` every topological boundary edge gets marker 1.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        cells: Vec<[usize; 3]>,
        boundary: Option<Vec<BoundaryEdge>>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (k, c) in cells.iter().enumerate() {
            for &v in c {
                if v >= nv {
                    return Err(MeshError::VertexIndex { cell: k, vertex: v, count: nv });
                }
            }
        }

        let mut cell_sizes = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let [a, b, d] = [vertices[c[0]], vertices[c[1]], vertices[c[2]]];
            let area = 0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]));
            if !(area > 0.0) {
                return Err(MeshError::Orientation { cell: k, area });
            }
            let l = [dist(b, d), dist(d, a), dist(a, b)];
            let diameter = l[0].max(l[1]).max(l[2]);
            let inradius = 2.0 * area / (l[0] + l[1] + l[2]);
            cell_sizes.push(CellSize { diameter, inradius, area });
        }

        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            for i in 0..3 {
                let key = edge_key(c[(i + 1) % 3], c[(i + 2) % 3]);
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                edge_cells[e].push(k);
                if edge_cells[e].len() > 2 {
                    return Err(MeshError::NonManifoldEdge(key.0, key.1));
                }
                ce[i] = e;
            }
            cell_edges.push(ce);
        }

        let mut boundary_edge_flag = vec![false; edges.len()];
        let mut boundary_vertex = vec![false; nv];
        for (e, cs) in edge_cells.iter().enumerate() {
            if cs.len() == 1 {
                boundary_edge_flag[e] = true;
                boundary_vertex[edges[e][0]] = true;
                boundary_vertex[edges[e][1]] = true;
            }
        }

        // a vertex sitting inside a single-cell edge is a hanging node
        for (e, &flag) in boundary_edge_flag.iter().enumerate() {
            if !flag {
                continue;
            }
            let [a, b] = edges[e];
            let (pa, pb) = (vertices[a], vertices[b]);
            let len = dist(pa, pb);
            for (v, &pv) in vertices.iter().enumerate() {
                if v == a || v == b || !boundary_vertex[v] {
                    continue;
                }
                let cross = (pb[0] - pa[0]) * (pv[1] - pa[1]) - (pb[1] - pa[1]) * (pv[0] - pa[0]);
                let t = ((pv[0] - pa[0]) * (pb[0] - pa[0]) + (pv[1] - pa[1]) * (pb[1] - pa[1])) / (len * len);
                if cross.abs() <= 1e-12 * len * len && t > 1e-12 && t < 1.0 - 1e-12 {
                    return Err(MeshError::HangingNode { vertex: v, a, b });
                }
            }
        }

        let boundary_edges = match boundary {
            None => edges
                .iter()
                .zip(&boundary_edge_flag)
                .filter(|(_, &f)| f)
                .map(|(e, _)| BoundaryEdge { vertices: *e, marker: 1 })
                .collect(),
            Some(list) => {
                let expected = boundary_edge_flag.iter().filter(|&&f| f).count();
                if list.len() != expected {
                    return Err(MeshError::BoundaryMismatch(format!(
                        "{} edges listed, {} on the boundary",
                        list.len(),
                        expected
                    )));
                }
                for be in &list {
                    let key = edge_key(be.vertices[0], be.vertices[1]);
                    match index.get(&key) {
                        Some(&e) if boundary_edge_flag[e] => {}
                        _ => {
                            return Err(MeshError::BoundaryMismatch(format!(
                                "({}, {}) is not a boundary edge",
                                key.0, key.1
                            )))
                        }
                    }
                }
                list
            }
        };

        let mut vertex_cells = vec![Vec::new(); nv];
        for (k, c) in cells.iter().enumerate() {
            for &v in c {
                vertex_cells[v].push(k);
            }
        }
        let patches = cells
            .iter()
            .map(|c| {
                let mut p: Vec<usize> = c.iter().flat_map(|&v| vertex_cells[v].iter().copied()).collect();
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();

        Ok(Triangulation {
            vertices,
            cells,
            boundary_edges,
            edges,
            cell_edges,
            edge_cells,
            vertex_cells,
            cell_sizes,
            patches,
            boundary_vertex,
            boundary_edge_flag,
        })
    }

    /// Structured triangulation of the unit square: `n x n` squares, each cut
    /// along its `(0,0)-(1,1)` diagonal. Boundary markers are 1 (bottom),
    /// 2 (right), 3 (top), 4 (left).
    pub fn unit_square(n: usize) -> Self {
        assert!(n >= 1, "unit_square needs n >= 1");
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        // exact endpoints
        for v in vertices.iter_mut() {
            for c in v.iter_mut() {
                if (*c - 1.0).abs() < 1e-14 {
                    *c = 1.0;
                }
            }
        }
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            }
        }
        let mut boundary = Vec::with_capacity(4 * n);
        for i in 0..n {
            boundary.push(BoundaryEdge { vertices: [idx(i, 0), idx(i + 1, 0)], marker: 1 });
        }
        for j in 0..n {
            boundary.push(BoundaryEdge { vertices: [idx(n, j), idx(n, j + 1)], marker: 2 });
        }
        for i in (0..n).rev() {
            boundary.push(BoundaryEdge { vertices: [idx(i + 1, n), idx(i, n)], marker: 3 });
        }
        for j in (0..n).rev() {
            boundary.push(BoundaryEdge { vertices: [idx(0, j + 1), idx(0, j)], marker: 4 });
        }
        Triangulation::new(vertices, cells, Some(boundary)).expect("structured mesh is valid")
    }

    /// Red refinement: every cell split into four similar children through
    /// its edge midpoints. Parent vertices keep their indices; the midpoint
    /// of edge `e` becomes vertex `num_vertices + e`.
    pub fn refine_uniform(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for e in &self.edges {
            let (a, b) = (self.vertices[e[0]], self.vertices[e[1]]);
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (c, ce) in self.cells.iter().zip(&self.cell_edges) {
            // midpoint opposite local vertex i
            let m = [nv + ce[0], nv + ce[1], nv + ce[2]];
            cells.push([c[0], m[2], m[1]]);
            cells.push([m[2], c[1], m[0]]);
            cells.push([m[1], m[0], c[2]]);
            cells.push([m[0], m[1], m[2]]);
        }
        let index: HashMap<(usize, usize), usize> =
            self.edges.iter().enumerate().map(|(e, v)| ((v[0], v[1]), e)).collect();
        let mut boundary = Vec::with_capacity(2 * self.boundary_edges.len());
        for be in &self.boundary_edges {
            let [a, b] = be.vertices;
            let mid = nv + index[&edge_key(a, b)];
            boundary.push(BoundaryEdge { vertices: [a, mid], marker: be.marker });
            boundary.push(BoundaryEdge { vertices: [mid, b], marker: be.marker });
        }
        Triangulation::new(vertices, cells, Some(boundary)).expect("refinement preserves validity")
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn edge_cells(&self, e: usize) -> &[usize] {
        &self.edge_cells[e]
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    pub fn cell_size(&self, k: usize) -> CellSize {
        self.cell_sizes[k]
    }

    pub fn cell_sizes(&self) -> &[CellSize] {
        &self.cell_sizes
    }

    /// `S_K`: every cell sharing at least one vertex with `k`, `k` included.
    pub fn patch(&self, k: usize) -> &[usize] {
        &self.patches[k]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge_flag[e]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Global mesh size `h = max_K h_K`.
    pub fn mesh_size(&self) -> f64 {
        self.cell_sizes.iter().map(|s| s.diameter).fold(0.0, f64::max)
    }

    /// Shape-regularity constant `max_K h_K / rho_K` (`rho_K` the inradius).
    pub fn shape_regularity(&self) -> f64 {
        self.cell_sizes.iter().map(|s| s.diameter / s.inradius).fold(0.0, f64::max)
    }

    pub fn cell_vertices(&self, k: usize) -> [[f64; 2]; 3] {
        let c = self.cells[k];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn to_physical(&self, k: usize, bary: &[f64; 3]) -> [f64; 2] {
        let v = self.cell_vertices(k);
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    pub fn to_barycentric(&self, k: usize, x: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.cell_vertices(k);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// All cells containing `x` (closed cells, tolerance `1e-12`).
    pub fn locate(&self, x: [f64; 2]) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&k| self.to_barycentric(k, x).iter().all(|&l| l >= -1e-12))
            .collect()
    }

    pub fn region_cells(&self, region: Region) -> Vec<usize> {
        match region {
            Region::Cell(k) => vec![k],
            Region::Patch(k) => self.patches[k].clone(),
            Region::Domain => (0..self.cells.len()).collect(),
        }
    }

    pub fn region_area(&self, region: Region) -> f64 {
        self.region_cells(region).iter().map(|&k| self.cell_sizes[k].area).sum()
    }

    /// Composite-quadrature integral of `f` over a list of cells.
    pub fn integrate_cells<F: Fn([f64; 2]) -> f64>(&self, cells: &[usize], rule: &TriangleRule, f: F) -> f64 {
        cells
            .iter()
            .map(|&k| {
                let area = self.cell_sizes[k].area;
                let s: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(b, w)| w * f(self.to_physical(k, b)))
                    .sum();
                area * s
            })
            .sum()
    }

    /// Mean value `(1/|E|) int_E f` with the degree-8 rule.
    pub fn mean_over<F: Fn([f64; 2]) -> f64>(&self, region: Region, f: F) -> f64 {
        self.mean_over_with(region, &TriangleRule::degree8(), f)
    }

    pub fn mean_over_with<F: Fn([f64; 2]) -> f64>(&self, region: Region, rule: &TriangleRule, f: F) -> f64 {
        let cells = self.region_cells(region);
        let area: f64 = cells.iter().map(|&k| self.cell_sizes[k].area).sum();
        self.integrate_cells(&cells, rule, f) / area
    }

    /// Writes the plain-text `ntri-mesh 1` format.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), MeshError> {
        writeln!(w, "ntri-mesh 1")?;
        writeln!(w, "{}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:e} {:e}", v[0], v[1])?;
        }
        writeln!(w, "{}", self.cells.len())?;
        for c in &self.cells {
            writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
        }
        writeln!(w, "{}", self.boundary_edges.len())?;
        for b in &self.boundary_edges {
            writeln!(w, "{} {} {}", b.vertices[0], b.vertices[1], b.marker)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, MeshError> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let mut next = |what: &str| -> Result<(usize, String), MeshError> {
            match lines.next() {
                Some((n, Ok(s))) => Ok((n, s)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(MeshError::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") }),
            }
        };
        let (n, header) = next("header")?;
        if header.trim() != "ntri-mesh 1" {
            return Err(MeshError::Parse { line: n, msg: format!("bad header {header:?}") });
        }
        fn count(n: usize, s: &str) -> Result<usize, MeshError> {
            s.trim().parse().map_err(|_| MeshError::Parse { line: n, msg: format!("expected a count, got {s:?}") })
        }
        fn fields<T: std::str::FromStr>(n: usize, s: &str, k: usize) -> Result<Vec<T>, MeshError> {
            let v: Result<Vec<T>, _> = s.split_whitespace().map(str::parse).collect();
            match v {
                Ok(v) if v.len() == k => Ok(v),
                _ => Err(MeshError::Parse { line: n, msg: format!("expected {k} fields, got {s:?}") }),
            }
        }
        let (n, s) = next("vertex count")?;
        let nv = count(n, &s)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (n, s) = next("vertex")?;
            let f: Vec<f64> = fields(n, &s, 2)?;
            vertices.push([f[0], f[1]]);
        }
        let (n, s) = next("cell count")?;
        let nc = count(n, &s)?;
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (n, s) = next("cell")?;
            let f: Vec<usize> = fields(n, &s, 3)?;
            cells.push([f[0], f[1], f[2]]);
        }
        let (n, s) = next("boundary edge count")?;
        let nb = count(n, &s)?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (n, s) = next("boundary edge")?;
            let f: Vec<usize> = fields(n, &s, 3)?;
            boundary.push(BoundaryEdge { vertices: [f[0], f[1]], marker: f[2] as u32 });
        }
        Triangulation::new(vertices, cells, Some(boundary))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m1 = Triangulation::unit_square(1);
        assert_eq!((m1.num_cells(), m1.num_vertices()), (2, 4));
        let m2 = Triangulation::unit_square(2);
        assert_eq!((m2.num_cells(), m2.num_vertices()), (8, 9));
        assert_eq!(m2.boundary_edges().len(), 8);
        assert!((m2.mesh_size() - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn shape_regularity_of_right_isosceles_cells() {
        // h / rho with rho = (a + b - c) / 2 for legs a = b = 1/n, hypotenuse c
        let n = 4.0;
        let (a, c) = (1.0 / n, 2f64.sqrt() / n);
        let expected = c / ((2.0 * a - c) / 2.0);
        let m = Triangulation::unit_square(4);
        assert!((m.shape_regularity() - expected).abs() < 1e-12);
        assert!((expected - 4.828_427_124_746_19).abs() < 1e-12);
    }

    #[test]
    fn euler_characteristic() {
        let mut m = Triangulation::unit_square(3);
        for _ in 0..3 {
            let (v, e, f) = (m.num_vertices() as i64, m.num_edges() as i64, m.num_cells() as i64);
            assert_eq!(v - e + f, 1);
            for (e, cs) in (0..m.num_edges()).map(|e| (e, m.edge_cells(e))) {
                assert_eq!(cs.len() == 1, m.is_boundary_edge(e));
            }
            m = m.refine_uniform();
        }
    }

    #[test]
    fn refinement_halves_size_and_keeps_shape() {
        let m = Triangulation::unit_square(1);
        let r = m.refine_uniform();
        assert_eq!(r.num_cells(), 8);
        assert_eq!(r.mesh_size(), m.mesh_size() / 2.0);
        assert!((r.shape_regularity() - m.shape_regularity()).abs() < 1e-12);
        assert_eq!(&r.vertices()[..4], m.vertices());
        for k in 0..r.num_cells() {
            assert!(r.cell_size(k).area > 0.0);
        }
    }

    #[test]
    fn refined_patches_stay_inside_parent_patches() {
        let parent = Triangulation::unit_square(3);
        let child = parent.refine_uniform();
        for k in 0..child.num_cells() {
            let p = k / 4;
            let region = parent.patch(p);
            for &c in child.patch(k) {
                let v = child.cell_vertices(c);
                let centroid = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
                let inside = parent.locate(centroid).iter().any(|q| region.contains(q));
                assert!(inside, "child {k}: cell {c} leaves parent patch of {p}");
            }
        }
    }

    #[test]
    fn patch_sizes_bounded() {
        let m = Triangulation::unit_square(8);
        for k in 0..m.num_cells() {
            assert!(m.patch(k).len() <= 16);
            assert!(m.patch(k).contains(&k));
            let ratio = m.region_area(Region::Patch(k)) / m.cell_size(k).area;
            assert!(ratio <= 16.0);
        }
    }

    #[test]
    fn means() {
        let m = Triangulation::unit_square(4);
        assert!((m.mean_over(Region::Domain, |_| 3.5) - 3.5).abs() < 1e-14);
        assert!((m.mean_over(Region::Domain, |x| x[0]) - 0.5).abs() < 1e-14);
        // int_K x^2 over K = conv{(0,0),(1/4,0),(1/4,1/4)} is h^4/4 with h = 1/4
        let h: f64 = 0.25;
        let exact = h.powi(4) / 4.0 / (h * h / 2.0);
        assert!((m.mean_over(Region::Cell(0), |x| x[0] * x[0]) - exact).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_meshes() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            Triangulation::new(v.clone(), vec![[0, 2, 1]], None),
            Err(MeshError::Orientation { .. })
        ));
        assert!(matches!(Triangulation::new(v, vec![[0, 1, 7]], None), Err(MeshError::VertexIndex { .. })));
        // hanging node at (0.5, 0.5) on the hypotenuse of the lower-left cell
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]];
        let cells = vec![[0, 1, 2], [1, 3, 4], [4, 3, 2]];
        assert!(matches!(Triangulation::new(v, cells, None), Err(MeshError::HangingNode { .. })));
    }

    #[test]
    fn text_round_trip() {
        let m = Triangulation::unit_square(3).refine_uniform();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("ntri-mesh 1\n"));
        let back = Triangulation::read_text(std::io::Cursor::new(buf.clone())).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
        let mut again = Vec::new();
        back.write_text(&mut again).unwrap();
        assert_eq!(again, buf);
        assert!(Triangulation::read_text(std::io::Cursor::new("ntri-mesh 2\n")).is_err());
    }
}
