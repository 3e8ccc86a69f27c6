//! Mixed finite-element pairs on a triangulation.
//!
//! Velocity nodes are numbered vertices first, then bubbles (one per cell)
//! or edge midpoints (one per edge); the vector dof of node `i` and
//! component `c` is `2 i + c`. Pressure is continuous P1 on the vertices.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Triangulation;
use crate::orlicz::SymTensor2;
use crate::quadrature::TriangleRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("barycentric point {0:?} lies outside the reference cell")]
    OutsideCell([f64; 3]),
    #[error("cell index {0} out of range")]
    CellIndex(usize),
    #[error("coefficient vector has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// P1 + cubic bubble velocity, P1 pressure.
    Mini,
    /// P2 velocity, P1 pressure.
    TaylorHood,
    /// P1 velocity, P1 pressure. Not inf-sup stable; kept as a control case.
    EqualOrderP1,
}

impl PairKind {
    pub fn velocity_element(self) -> ScalarElement {
        match self {
            PairKind::Mini => ScalarElement::P1Bubble,
            PairKind::TaylorHood => ScalarElement::P2,
            PairKind::EqualOrderP1 => ScalarElement::P1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarElement {
    P1,
    P1Bubble,
    P2,
}

pub const MAX_LOCAL: usize = 6;

/// Local basis values and derivatives with respect to the three barycentric
/// coordinates, treated as independent variables.
#[derive(Clone, Copy, Debug)]
pub struct LocalShape {
    pub len: usize,
    pub values: [f64; MAX_LOCAL],
    pub dbary: [[f64; 3]; MAX_LOCAL],
}

impl ScalarElement {
    pub fn local_dim(self) -> usize {
        match self {
            ScalarElement::P1 => 3,
            ScalarElement::P1Bubble => 4,
            ScalarElement::P2 => 6,
        }
    }

    /// Local ordering: vertex functions, then the bubble `27 l0 l1 l2` or the
    /// edge functions `4 l1 l2, 4 l2 l0, 4 l0 l1` (edge opposite vertex i).
    pub fn shape(self, l: &[f64; 3]) -> LocalShape {
        let mut s = LocalShape { len: self.local_dim(), values: [0.0; MAX_LOCAL], dbary: [[0.0; 3]; MAX_LOCAL] };
        match self {
            ScalarElement::P1 | ScalarElement::P1Bubble => {
                for i in 0..3 {
                    s.values[i] = l[i];
                    s.dbary[i][i] = 1.0;
                }
                if self == ScalarElement::P1Bubble {
                    s.values[3] = 27.0 * l[0] * l[1] * l[2];
                    s.dbary[3] = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
                }
            }
            ScalarElement::P2 => {
                for i in 0..3 {
                    s.values[i] = l[i] * (2.0 * l[i] - 1.0);
                    s.dbary[i][i] = 4.0 * l[i] - 1.0;
                    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                    s.values[3 + i] = 4.0 * l[a] * l[b];
                    s.dbary[3 + i][a] = 4.0 * l[b];
                    s.dbary[3 + i][b] = 4.0 * l[a];
                }
            }
        }
        s
    }
}

/// Affine data of one cell.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(v: &[[f64; 2]; 3]) -> Self {
        let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let mut g = [[0.0; 2]; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
            *gi = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        CellGeometry { area: 0.5 * det, grad_lambda: g }
    }

    pub fn gradient(&self, dbary: &[f64; 3]) -> [f64; 2] {
        let g = &self.grad_lambda;
        [
            dbary[0] * g[0][0] + dbary[1] * g[1][0] + dbary[2] * g[2][0],
            dbary[0] * g[0][1] + dbary[1] * g[1][1] + dbary[2] * g[2][1],
        ]
    }
}

/// Node numbering for one scalar element on a mesh.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub element: ScalarElement,
    pub num_nodes: usize,
    cell_nodes: Vec<[usize; MAX_LOCAL]>,
    boundary: Vec<bool>,
}

impl DofMap {
    pub fn new(mesh: &Triangulation, element: ScalarElement) -> Self {
        let nv = mesh.num_vertices();
        let num_nodes = match element {
            ScalarElement::P1 => nv,
            ScalarElement::P1Bubble => nv + mesh.num_cells(),
            ScalarElement::P2 => nv + mesh.num_edges(),
        };
        let mut boundary = vec![false; num_nodes];
        for (v, b) in boundary.iter_mut().enumerate().take(nv) {
            *b = mesh.is_boundary_vertex(v);
        }
        if element == ScalarElement::P2 {
            for e in 0..mesh.num_edges() {
                boundary[nv + e] = mesh.is_boundary_edge(e);
            }
        }
        let cell_nodes = (0..mesh.num_cells())
            .map(|k| {
                let c = mesh.cells()[k];
                let mut n = [usize::MAX; MAX_LOCAL];
                n[..3].copy_from_slice(&c);
                match element {
                    ScalarElement::P1 => {}
                    ScalarElement::P1Bubble => n[3] = nv + k,
                    ScalarElement::P2 => {
                        let ce = mesh.cell_edges()[k];
                        for i in 0..3 {
                            n[3 + i] = nv + ce[i];
                        }
                    }
                }
                n
            })
            .collect();
        DofMap { element, num_nodes, cell_nodes, boundary }
    }

    pub fn cell_nodes(&self, k: usize) -> &[usize] {
        &self.cell_nodes[k][..self.element.local_dim()]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

/// Velocity/pressure pair on a fixed mesh with its quadrature rule.
#[derive(Clone, Debug)]
pub struct FeSpacePair {
    mesh: Arc<Triangulation>,
    kind: PairKind,
    velocity: DofMap,
    pressure: DofMap,
    quadrature: TriangleRule,
    geometry: Vec<CellGeometry>,
}

impl FeSpacePair {
    /// Builds the pair with the degree-8 quadrature rule.
    pub fn build(mesh: Arc<Triangulation>, kind: PairKind) -> Arc<Self> {
        let velocity = DofMap::new(&mesh, kind.velocity_element());
        let pressure = DofMap::new(&mesh, ScalarElement::P1);
        let geometry = (0..mesh.num_cells()).map(|k| CellGeometry::new(&mesh.cell_vertices(k))).collect();
        Arc::new(FeSpacePair { mesh, kind, velocity, pressure, quadrature: TriangleRule::degree8(), geometry })
    }

    /// Same spaces, different quadrature rule.
    pub fn with_quadrature(&self, rule: TriangleRule) -> Arc<Self> {
        Arc::new(FeSpacePair { quadrature: rule, ..self.clone() })
    }

    pub fn mesh(&self) -> &Arc<Triangulation> {
        &self.mesh
    }

    pub fn kind(&self) -> PairKind {
        self.kind
    }

    pub fn velocity_map(&self) -> &DofMap {
        &self.velocity
    }

    pub fn pressure_map(&self) -> &DofMap {
        &self.pressure
    }

    pub fn quadrature(&self) -> &TriangleRule {
        &self.quadrature
    }

    pub fn geometry(&self, k: usize) -> &CellGeometry {
        &self.geometry[k]
    }

    /// Vector velocity dofs, boundary included.
    pub fn num_velocity_dofs(&self) -> usize {
        2 * self.velocity.num_nodes
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.pressure.num_nodes
    }

    pub fn is_boundary_velocity_dof(&self, dof: usize) -> bool {
        self.velocity.is_boundary(dof / 2)
    }

    /// Physical location of a velocity node (bubbles sit at the barycentre).
    pub fn velocity_node_point(&self, node: usize) -> [f64; 2] {
        let nv = self.mesh.num_vertices();
        if node < nv {
            return self.mesh.vertices()[node];
        }
        match self.velocity.element {
            ScalarElement::P1 => unreachable!("P1 has vertex nodes only"),
            ScalarElement::P1Bubble => self.mesh.to_physical(node - nv, &[1.0 / 3.0; 3]),
            ScalarElement::P2 => {
                let [a, b] = self.mesh.edges()[node - nv];
                let (pa, pb) = (self.mesh.vertices()[a], self.mesh.vertices()[b]);
                [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
            }
        }
    }

    pub fn zero_velocity(self: &Arc<Self>) -> FeFunction {
        FeFunction { space: self.clone(), kind: FieldKind::Velocity, coeffs: vec![0.0; self.num_velocity_dofs()] }
    }

    pub fn zero_pressure(self: &Arc<Self>) -> FeFunction {
        FeFunction { space: self.clone(), kind: FieldKind::Pressure, coeffs: vec![0.0; self.num_pressure_dofs()] }
    }

    pub fn function(self: &Arc<Self>, kind: FieldKind, coeffs: Vec<f64>) -> Result<FeFunction, FemError> {
        let expected = match kind {
            FieldKind::Velocity => self.num_velocity_dofs(),
            FieldKind::Pressure => self.num_pressure_dofs(),
        };
        if coeffs.len() != expected {
            return Err(FemError::Length { got: coeffs.len(), expected });
        }
        Ok(FeFunction { space: self.clone(), kind, coeffs })
    }

    /// Nodal interpolation of a vector field. Bubble coefficients make the
    /// interpolant exact at the barycentre.
    pub fn interpolate_velocity<F: Fn([f64; 2]) -> [f64; 2]>(self: &Arc<Self>, f: F) -> FeFunction {
        let nv = self.mesh.num_vertices();
        let mut coeffs = vec![0.0; self.num_velocity_dofs()];
        for node in 0..self.velocity.num_nodes {
            let x = self.velocity_node_point(node);
            let mut val = f(x);
            if self.velocity.element == ScalarElement::P1Bubble && node >= nv {
                let c = self.mesh.cells()[node - nv];
                for comp in 0..2 {
                    let linear: f64 = c.iter().map(|&v| coeffs[2 * v + comp]).sum::<f64>() / 3.0;
                    val[comp] -= linear;
                }
            }
            coeffs[2 * node] = val[0];
            coeffs[2 * node + 1] = val[1];
        }
        FeFunction { space: self.clone(), kind: FieldKind::Velocity, coeffs }
    }

    /// Nodal interpolation into the pressure space.
    pub fn interpolate_pressure<F: Fn([f64; 2]) -> f64>(self: &Arc<Self>, f: F) -> FeFunction {
        let coeffs = self.mesh.vertices().iter().map(|&x| f(x)).collect();
        FeFunction { space: self.clone(), kind: FieldKind::Pressure, coeffs }
    }

    /// Clement interpolant into the pressure space: the value at vertex `z`
    /// is the mean of `f` over the cells containing `z`.
    pub fn interpolate_clement<F: Fn([f64; 2]) -> f64>(self: &Arc<Self>, f: F) -> FeFunction {
        let rule = &self.quadrature;
        let coeffs = (0..self.mesh.num_vertices())
            .map(|v| {
                let cells = self.mesh.vertex_cells(v);
                let area: f64 = cells.iter().map(|&k| self.geometry[k].area).sum();
                self.mesh.integrate_cells(cells, rule, &f) / area
            })
            .collect();
        FeFunction { space: self.clone(), kind: FieldKind::Pressure, coeffs }
    }

    /// Integral of every pressure basis function, `int_Omega eta_i`.
    pub fn pressure_basis_integrals(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_pressure_dofs()];
        for (k, c) in self.mesh.cells().iter().enumerate() {
            for &v in c {
                m[v] += self.geometry[k].area / 3.0;
            }
        }
        m
    }
}

/// Value, gradient and symmetric gradient of a finite-element function at a point.
/// Scalar fields use component 0 only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeEval {
    pub value: [f64; 2],
    /// `gradient[c][d] = d u_c / d x_d`.
    pub gradient: [[f64; 2]; 2],
    pub sym_gradient: SymTensor2,
}

impl FeEval {
    pub fn divergence(&self) -> f64 {
        self.gradient[0][0] + self.gradient[1][1]
    }
}

#[derive(Clone, Debug)]
pub struct FeFunction {
    pub space: Arc<FeSpacePair>,
    pub kind: FieldKind,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    fn map(&self) -> &DofMap {
        match self.kind {
            FieldKind::Velocity => &self.space.velocity,
            FieldKind::Pressure => &self.space.pressure,
        }
    }

    /// Exact polynomial evaluation at a barycentric point of `cell`.
    pub fn evaluate(&self, cell: usize, bary: &[f64; 3]) -> Result<FeEval, FemError> {
        if cell >= self.space.mesh.num_cells() {
            return Err(FemError::CellIndex(cell));
        }
        let sum: f64 = bary.iter().sum();
        if bary.iter().any(|&l| l < -1e-12) || (sum - 1.0).abs() > 1e-12 {
            return Err(FemError::OutsideCell(*bary));
        }
        let map = self.map();
        let shape = map.element.shape(bary);
        Ok(self.evaluate_shape(cell, &shape))
    }

    /// Evaluation from precomputed shape data; no bounds checks.
    pub fn evaluate_shape(&self, cell: usize, shape: &LocalShape) -> FeEval {
        let geo = &self.space.geometry[cell];
        let nodes = self.map().cell_nodes(cell);
        let mut value = [0.0; 2];
        let mut gradient = [[0.0; 2]; 2];
        match self.kind {
            FieldKind::Velocity => {
                for (i, &n) in nodes.iter().enumerate() {
                    let g = geo.gradient(&shape.dbary[i]);
                    for c in 0..2 {
                        let u = self.coeffs[2 * n + c];
                        value[c] += u * shape.values[i];
                        gradient[c][0] += u * g[0];
                        gradient[c][1] += u * g[1];
                    }
                }
                FeEval { value, gradient, sym_gradient: SymTensor2::sym_part(gradient) }
            }
            FieldKind::Pressure => {
                for (i, &n) in nodes.iter().enumerate() {
                    let g = geo.gradient(&shape.dbary[i]);
                    let u = self.coeffs[n];
                    value[0] += u * shape.values[i];
                    gradient[0][0] += u * g[0];
                    gradient[0][1] += u * g[1];
                }
                FeEval { value, gradient, sym_gradient: SymTensor2::ZERO }
            }
        }
    }

    /// Shape functions of this field's element at the space's quadrature points.
    pub fn tabulate(&self) -> Vec<LocalShape> {
        let el = self.map().element;
        self.space.quadrature.points.iter().map(|b| el.shape(b)).collect()
    }

    /// `int_Omega u` (component 0 for scalar fields).
    pub fn integral(&self) -> [f64; 2] {
        let tab = self.tabulate();
        let rule = &self.space.quadrature;
        let mut acc = [0.0; 2];
        for k in 0..self.space.mesh.num_cells() {
            let area = self.space.geometry[k].area;
            for (s, w) in tab.iter().zip(&rule.weights) {
                let e = self.evaluate_shape(k, s);
                acc[0] += area * w * e.value[0];
                acc[1] += area * w * e.value[1];
            }
        }
        acc
    }
}

/// Bucket grid for point location on a fixed mesh.
pub struct CellLocator {
    mesh: Arc<Triangulation>,
    origin: [f64; 2],
    cell_size: [f64; 2],
    dims: usize,
    buckets: Vec<Vec<usize>>,
}

impl CellLocator {
    pub fn new(mesh: Arc<Triangulation>) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in mesh.vertices() {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let dims = ((mesh.num_cells() as f64).sqrt().ceil() as usize).max(1);
        let cell_size = [((hi[0] - lo[0]) / dims as f64).max(f64::MIN_POSITIVE), ((hi[1] - lo[1]) / dims as f64).max(f64::MIN_POSITIVE)];
        let mut loc = CellLocator { mesh: mesh.clone(), origin: lo, cell_size, dims, buckets: vec![Vec::new(); dims * dims] };
        for k in 0..mesh.num_cells() {
            let v = mesh.cell_vertices(k);
            let (mut a, mut b) = ([usize::MAX; 2], [0usize; 2]);
            for p in &v {
                let ij = loc.bucket_of(*p);
                for d in 0..2 {
                    a[d] = a[d].min(ij[d]);
                    b[d] = b[d].max(ij[d]);
                }
            }
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    loc.buckets[j * dims + i].push(k);
                }
            }
        }
        loc
    }

    fn bucket_of(&self, x: [f64; 2]) -> [usize; 2] {
        let mut ij = [0; 2];
        for d in 0..2 {
            let t = ((x[d] - self.origin[d]) / self.cell_size[d]).floor();
            ij[d] = (t.max(0.0) as usize).min(self.dims - 1);
        }
        ij
    }

    /// First cell containing `x` and the barycentric coordinates of `x` in it,
    /// clamped onto the cell.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let [i, j] = self.bucket_of(x);
        for &k in &self.buckets[j * self.dims + i] {
            let b = self.mesh.to_barycentric(k, x);
            if b.iter().all(|&l| l >= -1e-10) {
                let c = [b[0].max(0.0), b[1].max(0.0), b[2].max(0.0)];
                let s = c[0] + c[1] + c[2];
                return Some((k, [c[0] / s, c[1] / s, c[2] / s]));
            }
        }
        None
    }
}

impl FeFunction {
    /// Nodal interpolation of this function into another space of the same
    /// field kind (used for warm starts across mesh levels). Points outside
    /// the source mesh get zero.
    pub fn transfer_to(&self, target: &Arc<FeSpacePair>) -> FeFunction {
        let locator = CellLocator::new(self.space.mesh.clone());
        let eval = |x: [f64; 2]| -> [f64; 2] {
            match locator.locate(x) {
                Some((k, b)) => self.evaluate_shape(k, &self.map().element.shape(&b)).value,
                None => [0.0; 2],
            }
        };
        match self.kind {
            FieldKind::Velocity => {
                let mut u = target.interpolate_velocity(eval);
                for (d, c) in u.coeffs.iter_mut().enumerate() {
                    if target.is_boundary_velocity_dof(d) {
                        *c = 0.0;
                    }
                }
                u
            }
            FieldKind::Pressure => target.interpolate_pressure(|x| eval(x)[0]),
        }
    }
}
