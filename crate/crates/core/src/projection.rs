//! Divergence-preserving projection for the MINI pair, Clement stability,
//! rigid-motion fitting and the discrete inf-sup constant.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::femspace::{FeFunction, FeSpacePair, FieldKind, PairKind, ScalarElement};
use crate::linalg::{CscMatrix, DirectSolver, LinearSolveError};
use crate::mesh::Triangulation;
use crate::quadrature::{GaussLegendre, TriangleRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("operation not available for the {0:?} pair")]
    UnsupportedPair(PairKind),
    #[error("{dofs} pressure dofs exceed the eigensolve budget of {limit}")]
    TooLarge { dofs: usize, limit: usize },
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error("dense eigensolve failed: {0}")]
    Eigen(String),
}

/// A vector field with an analytic gradient.
pub trait VectorField: Sync {
    fn value(&self, x: [f64; 2]) -> [f64; 2];
    /// `g[c][d] = d w_c / d x_d`.
    fn gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2];

    fn divergence(&self, x: [f64; 2]) -> f64 {
        let g = self.gradient(x);
        g[0][0] + g[1][1]
    }
}

/// Field given by two closures.
pub struct FnField<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> VectorField for FnField<F, G>
where
    F: Fn([f64; 2]) -> [f64; 2] + Sync,
    G: Fn([f64; 2]) -> [[f64; 2]; 2] + Sync,
{
    fn value(&self, x: [f64; 2]) -> [f64; 2] {
        (self.value)(x)
    }
    fn gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        (self.gradient)(x)
    }
}

/// Random trigonometric field `B(x) sum_j a_j cos(2 pi k_j . x + phi_j)`,
/// where `B = 16 x (1 - x) y (1 - y)` when `zero_trace` is set and `B = 1`
/// otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigField {
    terms: Vec<([f64; 2], [f64; 2], f64)>,
    zero_trace: bool,
}

impl TrigField {
    pub fn random<R: Rng>(rng: &mut R, terms: usize, max_frequency: u32, zero_trace: bool) -> Self {
        let terms = (0..terms)
            .map(|_| {
                let amp = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let k = [rng.gen_range(0..=max_frequency) as f64, rng.gen_range(0..=max_frequency) as f64];
                (amp, k, rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        TrigField { terms, zero_trace }
    }

    fn bubble(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        if !self.zero_trace {
            return (1.0, [0.0, 0.0]);
        }
        let (bx, by) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
        (16.0 * bx * by, [16.0 * (1.0 - 2.0 * x[0]) * by, 16.0 * bx * (1.0 - 2.0 * x[1])])
    }

    fn series(&self, x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut s = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (amp, k, phi) in &self.terms {
            let arg = 2.0 * PI * (k[0] * x[0] + k[1] * x[1]) + phi;
            let (sn, cs) = arg.sin_cos();
            for c in 0..2 {
                s[c] += amp[c] * cs;
                for d in 0..2 {
                    g[c][d] -= amp[c] * sn * 2.0 * PI * k[d];
                }
            }
        }
        (s, g)
    }
}

impl VectorField for TrigField {
    fn value(&self, x: [f64; 2]) -> [f64; 2] {
        let (b, _) = self.bubble(x);
        let (s, _) = self.series(x);
        [b * s[0], b * s[1]]
    }

    fn gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let (b, gb) = self.bubble(x);
        let (s, gs) = self.series(x);
        let mut g = [[0.0; 2]; 2];
        for c in 0..2 {
            for d in 0..2 {
                g[c][d] = gb[d] * s[c] + b * gs[c][d];
            }
        }
        g
    }
}

/// Rule used for integrals of smooth fields in this module.
pub fn fine_rule() -> TriangleRule {
    TriangleRule::collapsed_gauss(12)
}

fn fine_line() -> GaussLegendre {
    GaussLegendre::new(12)
}

fn vertex_based(space: &FeSpacePair) -> Result<(), ProjectionError> {
    match space.kind() {
        PairKind::Mini | PairKind::EqualOrderP1 => Ok(()),
        k => Err(ProjectionError::UnsupportedPair(k)),
    }
}

/// Scott-Zhang interpolant into the piecewise linear part of the velocity
/// space. Interior vertices average against the dual basis on their
/// lowest-index cell, boundary vertices on their lowest-index boundary edge,
/// so linear fields are reproduced and zero traces are kept exactly.
pub fn scott_zhang<W: VectorField + ?Sized>(space: &Arc<FeSpacePair>, w: &W) -> Result<FeFunction, ProjectionError> {
    vertex_based(space)?;
    let mesh = space.mesh();
    let rule = fine_rule();
    let line = fine_line();
    let mut boundary_edge = vec![usize::MAX; mesh.num_vertices()];
    for e in 0..mesh.num_edges() {
        if mesh.is_boundary_edge(e) {
            for v in mesh.edges()[e] {
                boundary_edge[v] = boundary_edge[v].min(e);
            }
        }
    }
    let values: Vec<[f64; 2]> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|z| {
            let mut acc = [0.0; 2];
            if mesh.is_boundary_vertex(z) {
                // dual basis on the edge: (2/|e|)(3 l_z - 1); normalised by |e|
                let [a, b] = mesh.edges()[boundary_edge[z]];
                let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                for (t, wt) in line.nodes.iter().zip(&line.weights) {
                    let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                    let lz = if z == a { 1.0 - t } else { *t };
                    let val = w.value(x);
                    let dual = 2.0 * (3.0 * lz - 1.0);
                    acc[0] += wt * dual * val[0];
                    acc[1] += wt * dual * val[1];
                }
            } else {
                // dual basis on the cell: (3/|K|)(4 l_z - 1); the area cancels
                let k = *mesh.vertex_cells(z).iter().min().expect("vertex has cells");
                let local = mesh.cells()[k].iter().position(|&v| v == z).expect("vertex of cell");
                for (bary, wt) in rule.points.iter().zip(&rule.weights) {
                    let val = w.value(mesh.to_physical(k, bary));
                    let dual = 3.0 * (4.0 * bary[local] - 1.0);
                    acc[0] += wt * dual * val[0];
                    acc[1] += wt * dual * val[1];
                }
            }
            acc
        })
        .collect();
    let mut u = space.zero_velocity();
    for (z, v) in values.iter().enumerate() {
        u.coeffs[2 * z] = v[0];
        u.coeffs[2 * z + 1] = v[1];
    }
    Ok(u)
}

/// `Pi_div w = Pi_SZ w + sum_K c_K b_K` with `c_K = int_K (w - Pi_SZ w) / int_K b_K`.
pub fn pi_div<W: VectorField + ?Sized>(space: &Arc<FeSpacePair>, w: &W) -> Result<FeFunction, ProjectionError> {
    if space.kind() != PairKind::Mini {
        return Err(ProjectionError::UnsupportedPair(space.kind()));
    }
    let mut u = scott_zhang(space, w)?;
    let mesh = space.mesh();
    let nv = mesh.num_vertices();
    let rule = fine_rule();
    let bubbles: Vec<[f64; 2]> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let area = space.geometry(k).area;
            let mut int_w = [0.0; 2];
            for (bary, wt) in rule.points.iter().zip(&rule.weights) {
                let val = w.value(mesh.to_physical(k, bary));
                int_w[0] += wt * area * val[0];
                int_w[1] += wt * area * val[1];
            }
            let c = mesh.cells()[k];
            let int_b = 9.0 * area / 20.0;
            let mut coef = [0.0; 2];
            for comp in 0..2 {
                let int_sz = area / 3.0 * c.iter().map(|&v| u.coeffs[2 * v + comp]).sum::<f64>();
                coef[comp] = (int_w[comp] - int_sz) / int_b;
            }
            coef
        })
        .collect();
    for (k, c) in bubbles.iter().enumerate() {
        u.coeffs[2 * (nv + k)] = c[0];
        u.coeffs[2 * (nv + k) + 1] = c[1];
    }
    Ok(u)
}

/// Worst defect of `<div (w - Pi w), eta_i>` over the pressure basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivResidual {
    pub max_abs: f64,
    /// `max_abs / max_i int_{supp eta_i} |grad w|`.
    pub relative: f64,
}

pub fn div_preservation_residual<W: VectorField + ?Sized>(w: &W, pi_w: &FeFunction) -> DivResidual {
    let space = &pi_w.space;
    let mesh = space.mesh();
    let rule = fine_rule();
    let element = space.velocity_map().element;
    let tab: Vec<_> = rule.points.iter().map(|b| element.shape(b)).collect();
    let per_cell: Vec<([f64; 3], f64)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let area = space.geometry(k).area;
            let mut r = [0.0; 3];
            let mut grad_abs = 0.0;
            for (q, (bary, wt)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let x = mesh.to_physical(k, bary);
                let g = w.gradient(x);
                let div_h = pi_w.evaluate_shape(k, &tab[q]).divergence();
                for (m, rm) in r.iter_mut().enumerate() {
                    *rm += wt * area * (g[0][0] + g[1][1] - div_h) * bary[m];
                }
                grad_abs += wt * area * (g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2)).sqrt();
            }
            (r, grad_abs)
        })
        .collect();
    let mut res = vec![0.0; mesh.num_vertices()];
    let mut scale = vec![0.0; mesh.num_vertices()];
    for (k, (r, g)) in per_cell.iter().enumerate() {
        for (m, &v) in mesh.cells()[k].iter().enumerate() {
            res[v] += r[m];
            scale[v] += g;
        }
    }
    let max_abs = res.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let max_scale = scale.iter().fold(0.0f64, |a, &b| a.max(b));
    DivResidual { max_abs, relative: if max_scale > 0.0 { max_abs / max_scale } else { max_abs } }
}

/// Per-cell integrals `(int_K |w|, int_K |grad w|)` with the fine rule.
fn cell_integrals<W: VectorField + ?Sized>(mesh: &Triangulation, w: &W) -> Vec<(f64, f64)> {
    let rule = fine_rule();
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let area = mesh.cell_size(k).area;
            let mut acc = (0.0, 0.0);
            for (bary, wt) in rule.points.iter().zip(&rule.weights) {
                let x = mesh.to_physical(k, bary);
                let v = w.value(x);
                let g = w.gradient(x);
                acc.0 += wt * area * v[0].hypot(v[1]);
                acc.1 += wt * area * (g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2)).sqrt();
            }
            acc
        })
        .collect()
}

fn fe_cell_abs_means(u: &FeFunction) -> Vec<f64> {
    let space = &u.space;
    let rule = fine_rule();
    let element = match u.kind {
        FieldKind::Velocity => space.velocity_map().element,
        FieldKind::Pressure => ScalarElement::P1,
    };
    let tab: Vec<_> = rule.points.iter().map(|b| element.shape(b)).collect();
    (0..space.mesh().num_cells())
        .into_par_iter()
        .map(|k| {
            tab.iter()
                .zip(&rule.weights)
                .map(|(s, wt)| {
                    let v = u.evaluate_shape(k, s).value;
                    wt * v[0].hypot(v[1])
                })
                .sum()
        })
        .collect()
}

/// `max_K mean_K |Pi w| / (mean_{S_K} |w| + mean_{S_K} h_K |grad w|)`.
pub fn pi_div_stability_ratio<W: VectorField + ?Sized>(w: &W, pi_w: &FeFunction) -> f64 {
    let mesh = pi_w.space.mesh();
    let ints = cell_integrals(mesh, w);
    let means = fe_cell_abs_means(pi_w);
    (0..mesh.num_cells())
        .map(|k| {
            let patch = mesh.patch(k);
            let area: f64 = patch.iter().map(|&j| mesh.cell_size(j).area).sum();
            let h = mesh.cell_size(k).diameter;
            let rhs = patch.iter().map(|&j| ints[j].0 + h * ints[j].1).sum::<f64>() / area;
            if rhs > 0.0 {
                means[k] / rhs
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// `max_K mean_K |Pi_Y f| / mean_{S_K} |f|` for the Clement interpolant.
pub fn clement_stability_ratio<F: Fn([f64; 2]) -> f64 + Sync>(space: &Arc<FeSpacePair>, f: F) -> f64 {
    let mesh = space.mesh();
    let fine = space.with_quadrature(fine_rule());
    let pi = fine.interpolate_clement(&f);
    let means = fe_cell_abs_means(&pi);
    let rule = fine_rule();
    let abs_int: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| mesh.integrate_cells(&[k], &rule, |x| f(x).abs()))
        .collect();
    (0..mesh.num_cells())
        .map(|k| {
            let patch = mesh.patch(k);
            let area: f64 = patch.iter().map(|&j| mesh.cell_size(j).area).sum();
            let rhs = patch.iter().map(|&j| abs_int[j]).sum::<f64>() / area;
            if rhs > 0.0 {
                means[k] / rhs
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// `R(x) = A x + b` with `A = [[0, -omega], [omega, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub omega: f64,
    pub b: [f64; 2],
}

impl RigidMotion {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        [self.b[0] - self.omega * x[1], self.b[1] + self.omega * x[0]]
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[0.0, -self.omega], [self.omega, 0.0]]
    }
}

/// L2-best rigid motion on the union of `cells`, from first moments.
pub fn rigid_motion_fit<U: Fn([f64; 2]) -> [f64; 2] + Sync>(u: U, mesh: &Triangulation, cells: &[usize], rule: &TriangleRule) -> RigidMotion {
    let area = mesh.integrate_cells(cells, rule, |_| 1.0);
    let xc = [mesh.integrate_cells(cells, rule, |x| x[0]) / area, mesh.integrate_cells(cells, rule, |x| x[1]) / area];
    let mean = [mesh.integrate_cells(cells, rule, |x| u(x)[0]) / area, mesh.integrate_cells(cells, rule, |x| u(x)[1]) / area];
    // R = mean + omega J (x - xc); omega from the projection onto J (x - xc)
    let num = mesh.integrate_cells(cells, rule, |x| {
        let v = u(x);
        -v[0] * (x[1] - xc[1]) + v[1] * (x[0] - xc[0])
    });
    let den = mesh.integrate_cells(cells, rule, |x| (x[0] - xc[0]).powi(2) + (x[1] - xc[1]).powi(2));
    let omega = num / den;
    RigidMotion { omega, b: [mean[0] + omega * xc[1], mean[1] - omega * xc[0]] }
}

/// `(mean_S |u - R| / diam(S)) / mean_S |D u|` on the patch `S_K` of cell `k`,
/// with `R` the best-fit rigid motion.
pub fn korn_ratio<W: VectorField + ?Sized>(w: &W, mesh: &Triangulation, k: usize, rule: &TriangleRule) -> f64 {
    let patch = mesh.patch(k);
    let r = rigid_motion_fit(|x| w.value(x), mesh, patch, rule);
    let mut diam: f64 = 0.0;
    let pts: Vec<[f64; 2]> = patch.iter().flat_map(|&j| mesh.cell_vertices(j)).collect();
    for a in &pts {
        for b in &pts {
            diam = diam.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    let dist = mesh.integrate_cells(patch, rule, |x| {
        let (v, rv) = (w.value(x), r.eval(x));
        (v[0] - rv[0]).hypot(v[1] - rv[1])
    });
    let sym = mesh.integrate_cells(patch, rule, |x| {
        let g = w.gradient(x);
        let off = 0.5 * (g[0][1] + g[1][0]);
        (g[0][0].powi(2) + 2.0 * off * off + g[1][1].powi(2)).sqrt()
    });
    if sym > 0.0 {
        dist / diam / sym
    } else {
        0.0
    }
}

/// Largest patch Korn ratio over 50 random smooth fields (seed 7) on the
/// `n = 4, 8, 16` unit-square meshes, widened by 5%.
pub const KORN_CONSTANT: f64 = 0.252;

/// Measured constants for the interpolation assumptions on one mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub h: f64,
    /// Worst relative `|<div (w - Pi_div w), eta_h>|` over samples and pressure basis.
    pub max_div_residual: f64,
    /// Worst measured constant of the local `W^{1,1}` bound for `Pi_div`.
    pub stability_constant: f64,
    /// Worst measured constant of the local `L^1` bound for `Pi_Y`.
    pub clement_stability_constant: f64,
    /// `max |Pi_div w - w|` at the nodes for a global linear `w`.
    pub linear_reproduction_error: f64,
    /// `max |Pi_Y c - c|` for a constant `c`.
    pub constant_error: f64,
    /// Largest boundary coefficient of any `Pi_div w` with zero trace.
    pub boundary_max: f64,
    pub samples: usize,
}

/// Runs the randomized checks of the MINI interpolation operators.
pub fn verify_assumptions(space: &Arc<FeSpacePair>, n_samples: usize, seed: u64) -> Result<AssumptionReport, ProjectionError> {
    if space.kind() != PairKind::Mini {
        return Err(ProjectionError::UnsupportedPair(space.kind()));
    }
    let n_samples = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<TrigField> = (0..n_samples).map(|_| TrigField::random(&mut rng, 3, 2, true)).collect();
    let scalars: Vec<(TrigField, f64, f64)> = (0..n_samples)
        .map(|_| (TrigField::random(&mut rng, 3, 2, false), rng.gen_range(0.2..0.8), rng.gen_range(-2.0..2.0)))
        .collect();

    let mut report = AssumptionReport {
        h: space.mesh().mesh_size(),
        max_div_residual: 0.0,
        stability_constant: 0.0,
        clement_stability_constant: 0.0,
        linear_reproduction_error: 0.0,
        constant_error: 0.0,
        boundary_max: 0.0,
        samples: n_samples,
    };
    for w in &fields {
        let pw = pi_div(space, w)?;
        report.max_div_residual = report.max_div_residual.max(div_preservation_residual(w, &pw).relative);
        report.stability_constant = report.stability_constant.max(pi_div_stability_ratio(w, &pw));
        for d in 0..space.num_velocity_dofs() {
            if space.is_boundary_velocity_dof(d) {
                report.boundary_max = report.boundary_max.max(pw.coeffs[d].abs());
            }
        }
    }
    for (g, jump_at, jump) in &scalars {
        // piecewise smooth: smooth part plus a jump across x = jump_at
        let f = |x: [f64; 2]| g.value(x)[0] + if x[0] > *jump_at { *jump } else { 0.0 };
        report.clement_stability_constant = report.clement_stability_constant.max(clement_stability_ratio(space, f));
    }
    let (a, m) = ([0.3, -0.7], [[1.1, -0.4], [2.0, 0.5]]);
    let lin = FnField { value: move |x: [f64; 2]| [a[0] + m[0][0] * x[0] + m[0][1] * x[1], a[1] + m[1][0] * x[0] + m[1][1] * x[1]], gradient: move |_| m };
    let pl = pi_div(space, &lin)?;
    let exact = space.interpolate_velocity(|x| lin.value(x));
    report.linear_reproduction_error = pl.coeffs.iter().zip(&exact.coeffs).fold(0.0, |e, (p, q)| e.max((p - q).abs()));
    let c = space.interpolate_clement(|_| 1.75);
    report.constant_error = c.coeffs.iter().fold(0.0, |e, v| e.max((v - 1.75).abs()));
    Ok(report)
}

/// Largest pressure space handled by [`infsup_estimate`].
pub const INFSUP_DOF_LIMIT: usize = 20_000;

/// Discrete LBB constant for the Stokes inner products:
/// `beta_h^2 = min { (B A^-1 B^T q, q) / (M q, q) : q in Y_h, int q = 0 }`
/// with `A` the vector Laplacian on `V_h` and `M` the pressure mass matrix.
pub fn infsup_estimate(space: &Arc<FeSpacePair>) -> Result<f64, ProjectionError> {
    Ok(infsup_spectrum(space)?[0])
}

/// All generalized singular values `sqrt(lambda)` of `(B A^-1 B^T, M)` on the
/// mean-zero pressures, ascending. The first entry is `beta_h`.
pub fn infsup_spectrum(space: &Arc<FeSpacePair>) -> Result<Vec<f64>, ProjectionError> {
    let np = space.num_pressure_dofs();
    if np > INFSUP_DOF_LIMIT {
        return Err(ProjectionError::TooLarge { dofs: np, limit: INFSUP_DOF_LIMIT });
    }
    let (a, bt, mass) = stokes_blocks(space);
    let nf = a.nrows();
    let mut solver = DirectSolver::new();
    let lu = solver.factorize(&a)?;
    // S = B A^-1 B^T, column by column
    let cols: Vec<Vec<f64>> = (0..np)
        .map(|j| {
            let mut rhs = vec![0.0; nf];
            for (i, v) in bt.column(j) {
                rhs[i] = v;
            }
            lu.solve(&rhs).map(|s| s.solution)
        })
        .collect::<Result<_, _>>()?;
    let b = bt.transpose();
    let mut s = Mat::<f64>::zeros(np, np);
    for (j, x) in cols.iter().enumerate() {
        let bx = b.matvec(x);
        for i in 0..np {
            s[(i, j)] = bx[i];
        }
    }
    let s = Mat::from_fn(np, np, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));

    // C = M^-1/2 S M^-1/2, deflate the constant mode M^1/2 1
    let eig = mass.to_dense().self_adjoint_eigen(Side::Lower).map_err(|e| ProjectionError::Eigen(format!("{e:?}")))?;
    let (q, d) = (eig.U(), eig.S());
    let isq = Mat::from_fn(np, np, |i, j| q[(i, j)] / d[j].sqrt());
    let m_half_inv = &isq * q.transpose();
    let sq = Mat::from_fn(np, np, |i, j| q[(i, j)] * d[j].sqrt());
    let m_half = &sq * q.transpose();
    let mut c = &m_half_inv * &s * &m_half_inv;
    let ones = Mat::from_fn(np, 1, |_, _| 1.0);
    let u = &m_half * &ones;
    let unorm = (0..np).map(|i| u[(i, 0)].powi(2)).sum::<f64>().sqrt();
    let shift = (0..np).map(|i| c[(i, i)]).sum::<f64>().max(1.0);
    for i in 0..np {
        for j in 0..np {
            c[(i, j)] += shift * u[(i, 0)] * u[(j, 0)] / (unorm * unorm);
        }
    }
    let c = Mat::from_fn(np, np, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let ev = c.self_adjoint_eigenvalues(Side::Lower).map_err(|e| ProjectionError::Eigen(format!("{e:?}")))?;
    // the deflated constant mode sits at `shift` and is dropped
    let mut vals: Vec<f64> = (0..np).map(|i| ev[i].max(0.0).sqrt()).collect();
    let top = (0..np).max_by(|&i, &j| (ev[i] - shift).abs().partial_cmp(&(ev[j] - shift).abs()).unwrap().reverse()).unwrap();
    vals.remove(top);
    Ok(vals)
}

/// Generalized singular values below this count as spurious pressure modes.
pub const SPURIOUS_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSupReport {
    pub n: usize,
    pub h: f64,
    pub pressure_dofs: usize,
    /// Smallest generalized singular value on the mean-zero pressures.
    pub beta: f64,
    /// Number of values below [`SPURIOUS_THRESHOLD`].
    pub spurious_modes: usize,
    /// Smallest value above the threshold; equals `beta` for a stable pair.
    pub reduced_beta: f64,
}

pub fn infsup_report(space: &Arc<FeSpacePair>, n: usize) -> Result<InfSupReport, ProjectionError> {
    let spec = infsup_spectrum(space)?;
    let spurious = spec.iter().take_while(|&&v| v < SPURIOUS_THRESHOLD).count();
    Ok(InfSupReport {
        n,
        h: space.mesh().mesh_size(),
        pressure_dofs: space.num_pressure_dofs(),
        beta: spec[0],
        spurious_modes: spurious,
        reduced_beta: spec.get(spurious).copied().unwrap_or(f64::NAN),
    })
}

/// `(A, B^T, M)`: vector Laplacian on the free velocity dofs, the transposed
/// divergence matrix `-int div phi_j psi_k` and the pressure mass matrix.
pub fn stokes_blocks(space: &FeSpacePair) -> (CscMatrix, CscMatrix, CscMatrix) {
    let mesh = space.mesh();
    let rule = space.quadrature();
    let element = space.velocity_map().element;
    let tab: Vec<_> = rule.points.iter().map(|b| element.shape(b)).collect();
    let mut free = vec![usize::MAX; space.num_velocity_dofs()];
    let mut nf = 0;
    for (d, f) in free.iter_mut().enumerate() {
        if !space.is_boundary_velocity_dof(d) {
            *f = nf;
            nf += 1;
        }
    }
    let np = space.num_pressure_dofs();
    let (mut ta, mut tb, mut tm) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..mesh.num_cells() {
        let geo = space.geometry(k);
        let nodes = space.velocity_map().cell_nodes(k);
        let verts = mesh.cells()[k];
        let nl = nodes.len();
        let mut a = vec![0.0; nl * nl];
        let mut b = vec![[0.0; 2]; 3 * nl];
        for (q, (bary, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let wk = w * geo.area;
            let g: Vec<[f64; 2]> = (0..nl).map(|i| geo.gradient(&tab[q].dbary[i])).collect();
            for i in 0..nl {
                for j in 0..nl {
                    a[i * nl + j] += wk * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
                for m in 0..3 {
                    for c in 0..2 {
                        b[m * nl + i][c] -= wk * bary[m] * g[i][c];
                    }
                }
            }
        }
        for i in 0..nl {
            for c in 0..2 {
                let fi = free[2 * nodes[i] + c];
                if fi == usize::MAX {
                    continue;
                }
                for j in 0..nl {
                    let fj = free[2 * nodes[j] + c];
                    if fj != usize::MAX {
                        ta.push((fi, fj, a[i * nl + j]));
                    }
                }
                for m in 0..3 {
                    tb.push((fi, verts[m], b[m * nl + i][c]));
                }
            }
        }
        for m in 0..3 {
            for l in 0..3 {
                tm.push((verts[m], verts[l], geo.area / 12.0 * if m == l { 2.0 } else { 1.0 }));
            }
        }
    }
    (CscMatrix::from_triplets(nf, nf, &ta), CscMatrix::from_triplets(nf, np, &tb), CscMatrix::from_triplets(np, np, &tm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{CurlBubbleSine, ManufacturedPair};

    fn mini(n: usize) -> Arc<FeSpacePair> {
        FeSpacePair::build(Arc::new(Triangulation::unit_square(n)), PairKind::Mini)
    }

    fn curl_field() -> impl VectorField {
        FnField { value: |x| CurlBubbleSine.velocity(x), gradient: |x| CurlBubbleSine.velocity_gradient(x) }
    }

    #[test]
    fn trig_field_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for zero_trace in [true, false] {
            let f = TrigField::random(&mut rng, 3, 2, zero_trace);
            let x = [0.37, 0.61];
            let g = f.gradient(x);
            let h = 1e-6;
            for d in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[d] += h;
                xm[d] -= h;
                for c in 0..2 {
                    let fd = (f.value(xp)[c] - f.value(xm)[c]) / (2.0 * h);
                    assert!((fd - g[c][d]).abs() < 1e-6);
                }
            }
            if zero_trace {
                assert_eq!(f.value([0.0, 0.3]), [0.0, 0.0]);
                assert_eq!(f.value([0.4, 1.0]), [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn pi_div_reproduces_linear_fields() {
        let s = mini(4);
        let m = [[0.5, -1.5], [0.25, 2.0]];
        let lin = FnField { value: move |x: [f64; 2]| [1.0 + m[0][0] * x[0] + m[0][1] * x[1], -2.0 + m[1][0] * x[0] + m[1][1] * x[1]], gradient: move |_| m };
        let p = pi_div(&s, &lin).unwrap();
        let e = s.interpolate_velocity(|x| lin.value(x));
        for (a, b) in p.coeffs.iter().zip(&e.coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_div_preserves_divergence_for_curl_field() {
        let s = mini(8);
        let w = curl_field();
        let p = pi_div(&s, &w).unwrap();
        let r = div_preservation_residual(&w, &p);
        assert!(r.relative <= 1e-10, "{r:?}");
        for d in 0..s.num_velocity_dofs() {
            if s.is_boundary_velocity_dof(d) {
                assert_eq!(p.coeffs[d], 0.0);
            }
        }
        // without the bubble correction the defect is visible
        let sz = scott_zhang(&s, &w).unwrap();
        assert!(div_preservation_residual(&w, &sz).relative > 1e-6);
    }

    #[test]
    fn pi_div_rejects_taylor_hood() {
        let s = FeSpacePair::build(Arc::new(Triangulation::unit_square(2)), PairKind::TaylorHood);
        assert_eq!(pi_div(&s, &curl_field()).unwrap_err(), ProjectionError::UnsupportedPair(PairKind::TaylorHood));
    }

    #[test]
    fn rigid_motion_examples() {
        let mesh = Triangulation::unit_square(4);
        let rule = TriangleRule::degree8();
        let all: Vec<usize> = (0..mesh.num_cells()).collect();
        let r = rigid_motion_fit(|x| [0.5 - 0.3 * x[1], -1.0 + 0.3 * x[0]], &mesh, &all, &rule);
        assert!((r.omega - 0.3).abs() < 1e-13 && (r.b[0] - 0.5).abs() < 1e-13 && (r.b[1] + 1.0).abs() < 1e-13);
        let d = rigid_motion_fit(|x| x, &mesh, &all, &rule);
        assert!(d.omega.abs() < 1e-13);
        assert!((d.b[0] - 0.5).abs() < 1e-13 && (d.b[1] - 0.5).abs() < 1e-13);
        let a = d.matrix();
        assert_eq!(a[0][1], -a[1][0]);
    }

    #[test]
    fn rigid_motion_beats_random_candidates() {
        let mesh = Triangulation::unit_square(4);
        let rule = TriangleRule::degree8();
        let cells = mesh.patch(9).to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = TrigField::random(&mut rng, 3, 1, false);
        let dist = |r: &RigidMotion| {
            mesh.integrate_cells(&cells, &rule, |x| {
                let (v, rv) = (u.value(x), r.eval(x));
                (v[0] - rv[0]).powi(2) + (v[1] - rv[1]).powi(2)
            })
        };
        let best = rigid_motion_fit(|x| u.value(x), &mesh, &cells, &rule);
        let db = dist(&best);
        for _ in 0..1000 {
            let cand = RigidMotion {
                omega: best.omega + rng.gen_range(-1.0..1.0),
                b: [best.b[0] + rng.gen_range(-1.0..1.0), best.b[1] + rng.gen_range(-1.0..1.0)],
            };
            assert!(db <= dist(&cand) + 1e-14);
        }
    }

    #[test]
    fn clement_constants_and_stability() {
        let s = mini(8);
        let c = s.interpolate_clement(|_| -3.5);
        assert!(c.coeffs.iter().all(|&v| v == -3.5 || (v + 3.5).abs() < 1e-14));
        let r = clement_stability_ratio(&s, |x| (7.0 * x[0]).sin() * x[1]);
        assert!(r > 0.0 && r <= 10.0, "{r}");
    }

    #[test]
    fn korn_ratio_vanishes_for_rigid_motions() {
        let mesh = Triangulation::unit_square(4);
        let rule = TriangleRule::degree8();
        let rigid = FnField { value: |x: [f64; 2]| [1.0 - 2.0 * x[1], 0.5 + 2.0 * x[0]], gradient: |_| [[0.0, -2.0], [2.0, 0.0]] };
        assert_eq!(korn_ratio(&rigid, &mesh, 5, &rule), 0.0);
        let stretch = FnField { value: |x: [f64; 2]| [x[0] * x[0], 0.0], gradient: |x: [f64; 2]| [[2.0 * x[0], 0.0], [0.0, 0.0]] };
        assert!(korn_ratio(&stretch, &mesh, 5, &rule) > 0.0);
    }

    #[test]
    fn infsup_small_mesh_positive() {
        let b = infsup_estimate(&mini(4)).unwrap();
        assert!(b > 0.1 && b < 1.0, "{b}");
    }

    #[test]
    fn equal_order_pair_has_spurious_modes() {
        let s = FeSpacePair::build(Arc::new(Triangulation::unit_square(4)), PairKind::EqualOrderP1);
        let r = infsup_report(&s, 4).unwrap();
        assert!(r.spurious_modes > 0 && r.beta < SPURIOUS_THRESHOLD);
        assert!(r.reduced_beta > 0.05, "{r:?}");
        let m = infsup_report(&mini(4), 4).unwrap();
        assert_eq!(m.spurious_modes, 0);
        assert_eq!(m.beta, m.reduced_beta);
    }

    #[test]
    fn pi_div_stability_constant_bounded() {
        let s = mini(4);
        let r = verify_assumptions(&s, 10, 3).unwrap();
        assert!(r.stability_constant > 0.0 && r.stability_constant <= 20.0, "{r:?}");
        assert!(r.max_div_residual <= 1e-10);
    }
}
