//! Discrete p(x)-Stokes problem: assembly, saddle-point solves and damped
//! Newton with continuation.
//!
//! Unknowns are ordered as free (interior) velocity dofs, then all pressure
//! dofs, then one multiplier for the zero-mean pressure constraint. The
//! Jacobian has the block form
//!
//! ```text
//! [ A  B^T 0 ]
//! [ B  0   m ]
//! [ 0  m^T 0 ]
//! ```
//!
//! with `B_kj = -int div phi_j psi_k` and `m_k = int psi_k`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponent::{localize, ExponentField, PiecewiseExponent};
use crate::femspace::{FeFunction, FeSpacePair, FieldKind, LocalShape, ScalarElement};
use crate::linalg::{norm2, CscMatrix, DirectSolver, LinearSolveError};
use crate::orlicz::{NFunctionKernel, OrliczError, SymTensor2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("manufactured pair rejected: {0}")]
    InvalidManufactured(String),
    #[error("Newton requires kappa > 0")]
    ZeroRegularization,
    #[error("state has {got} unknowns, expected {expected}")]
    StateSize { got: usize, expected: usize },
    #[error("Newton did not converge; relative residual history {history:?}")]
    NotConverged { history: Vec<f64>, stages: Vec<StageRecord> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressMode {
    /// `S_T`: exponent frozen at the cell anchor.
    Localized,
    /// `S`: exponent evaluated at each quadrature point.
    Pointwise,
}

/// An exact solution `(v, q)` of the continuous problem.
pub trait ManufacturedPair: Send + Sync {
    fn label(&self) -> &str;
    fn velocity(&self, x: [f64; 2]) -> [f64; 2];
    /// `g[c][d] = d v_c / d x_d`.
    fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2];
    fn pressure(&self, x: [f64; 2]) -> f64;

    fn sym_gradient(&self, x: [f64; 2]) -> SymTensor2 {
        SymTensor2::sym_part(self.velocity_gradient(x))
    }
}

/// `v = curl psi` with `psi = x^2 (1-x)^2 y^2 (1-y)^2`, `q = sin(2 pi x) cos(2 pi y)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CurlBubbleSine;

fn bump(t: f64) -> [f64; 3] {
    // X, X', X'' for X = t^2 (1 - t)^2
    [t * t * (1.0 - t) * (1.0 - t), 2.0 * t - 6.0 * t * t + 4.0 * t * t * t, 2.0 - 12.0 * t + 12.0 * t * t]
}

impl ManufacturedPair for CurlBubbleSine {
    fn label(&self) -> &str {
        "curl_bubble_sine"
    }

    fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = (bump(x[0]), bump(x[1]));
        [a[0] * b[1], -a[1] * b[0]]
    }

    fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let (a, b) = (bump(x[0]), bump(x[1]));
        [[a[1] * b[1], a[0] * b[2]], [-a[2] * b[0], -a[1] * b[1]]]
    }

    fn pressure(&self, x: [f64; 2]) -> f64 {
        (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
    }
}

/// `v = 0`, `q = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPair;

impl ManufacturedPair for ZeroPair {
    fn label(&self) -> &str {
        "zero"
    }
    fn velocity(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
    fn velocity_gradient(&self, _: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
    fn pressure(&self, _: [f64; 2]) -> f64 {
        0.0
    }
}

/// Catalog lookup by label.
pub fn manufactured_by_name(name: &str) -> Option<Arc<dyn ManufacturedPair>> {
    match name {
        "curl_bubble_sine" => Some(Arc::new(CurlBubbleSine)),
        "zero" => Some(Arc::new(ZeroPair)),
        _ => None,
    }
}

pub type ForceFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Right-hand side `f` in `V*`.
#[derive(Clone)]
pub enum RhsFunctional {
    /// `<f, xi> = int S(x, Dv) : D xi - int q div xi` for the exact pair.
    Manufactured(Arc<dyn ManufacturedPair>),
    /// `<f, xi> = int f . xi`.
    ExplicitForce(ForceFn),
}

impl fmt::Debug for RhsFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsFunctional::Manufactured(m) => write!(f, "Manufactured({})", m.label()),
            RhsFunctional::ExplicitForce(_) => write!(f, "ExplicitForce"),
        }
    }
}

impl RhsFunctional {
    /// Checks that the pair is admissible on `space`: `int |div v|^2 <= 1e-20`,
    /// `|v| <= 1e-14` at boundary samples and `|int q| <= 1e-10`.
    pub fn manufactured(pair: Arc<dyn ManufacturedPair>, space: &FeSpacePair) -> Result<Self, SolverError> {
        let mesh = space.mesh();
        let all: Vec<usize> = (0..mesh.num_cells()).collect();
        let rule = space.quadrature();
        let div2 = mesh.integrate_cells(&all, rule, |x| {
            let g = pair.velocity_gradient(x);
            (g[0][0] + g[1][1]).powi(2)
        });
        if div2 > 1e-20 {
            return Err(SolverError::InvalidManufactured(format!("int |div v|^2 = {div2:e}")));
        }
        for i in 0..=64 {
            let t = i as f64 / 64.0;
            for x in [[t, 0.0], [1.0, t], [t, 1.0], [0.0, t]] {
                let v = pair.velocity(x);
                if v[0].hypot(v[1]) > 1e-14 {
                    return Err(SolverError::InvalidManufactured(format!("v({x:?}) = {v:?} on the boundary")));
                }
            }
        }
        let mean = mesh.integrate_cells(&all, rule, |x| pair.pressure(x));
        if mean.abs() > 1e-10 {
            return Err(SolverError::InvalidManufactured(format!("int q = {mean:e}")));
        }
        Ok(RhsFunctional::Manufactured(pair))
    }

    pub fn exact_pair(&self) -> Option<&Arc<dyn ManufacturedPair>> {
        match self {
            RhsFunctional::Manufactured(m) => Some(m),
            RhsFunctional::ExplicitForce(_) => None,
        }
    }
}

/// Position of every velocity dof in the unknown vector.
#[derive(Clone, Debug)]
pub struct DofLayout {
    free_index: Vec<Option<usize>>,
    pub num_free_velocity: usize,
    pub num_pressure: usize,
}

impl DofLayout {
    pub fn new(space: &FeSpacePair) -> Self {
        let mut next = 0;
        let free_index = (0..space.num_velocity_dofs())
            .map(|d| {
                if space.is_boundary_velocity_dof(d) {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        DofLayout { free_index, num_free_velocity: next, num_pressure: space.num_pressure_dofs() }
    }

    pub fn velocity_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn pressure_index(&self, k: usize) -> usize {
        self.num_free_velocity + k
    }

    pub fn multiplier_index(&self) -> usize {
        self.num_free_velocity + self.num_pressure
    }

    pub fn len(&self) -> usize {
        self.num_free_velocity + self.num_pressure + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Discrete problem on one mesh.
#[derive(Clone)]
pub struct FeProblem {
    space: Arc<FeSpacePair>,
    exponent: ExponentField,
    localized: PiecewiseExponent,
    kernel: NFunctionKernel,
    rhs: RhsFunctional,
    stress_mode: StressMode,
    layout: DofLayout,
    load: Arc<Vec<f64>>,
    theta: f64,
}

impl fmt::Debug for FeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeProblem")
            .field("pair", &self.space.kind())
            .field("cells", &self.space.mesh().num_cells())
            .field("exponent", &self.exponent)
            .field("kappa", &self.kernel.kappa())
            .field("mu", &self.kernel.mu())
            .field("rhs", &self.rhs)
            .field("stress_mode", &self.stress_mode)
            .field("theta", &self.theta)
            .finish()
    }
}

struct CellOutput {
    res_v: [f64; 12],
    res_q: [f64; 3],
    a: [[f64; 12]; 12],
    b: [[f64; 12]; 3],
}

/// Symmetric gradient of the vector basis function `N_i e_c` with `grad N_i = g`.
fn basis_sym_grad(g: [f64; 2], c: usize) -> SymTensor2 {
    if c == 0 {
        SymTensor2::new(g[0], 0.5 * g[1], 0.0)
    } else {
        SymTensor2::new(0.0, 0.5 * g[0], g[1])
    }
}

impl FeProblem {
    pub fn new(
        space: Arc<FeSpacePair>,
        exponent: ExponentField,
        kappa: f64,
        mu: f64,
        rhs: RhsFunctional,
        stress_mode: StressMode,
    ) -> Result<Self, SolverError> {
        let kernel = NFunctionKernel::new(kappa, mu, 2.0)?;
        if exponent.p_minus() <= 1.0 {
            return Err(SolverError::InvalidProblem(format!("p_minus = {} must exceed 1", exponent.p_minus())));
        }
        let localized = localize(&exponent, space.mesh());
        let layout = DofLayout::new(&space);
        let mut problem = FeProblem {
            space,
            exponent,
            localized,
            kernel,
            rhs,
            stress_mode,
            layout,
            load: Arc::new(Vec::new()),
            theta: 1.0,
        };
        problem.load = Arc::new(problem.assemble_load());
        Ok(problem)
    }

    pub fn space(&self) -> &Arc<FeSpacePair> {
        &self.space
    }

    pub fn exponent(&self) -> &ExponentField {
        &self.exponent
    }

    pub fn localized(&self) -> &PiecewiseExponent {
        &self.localized
    }

    pub fn kernel(&self) -> &NFunctionKernel {
        &self.kernel
    }

    pub fn rhs(&self) -> &RhsFunctional {
        &self.rhs
    }

    pub fn stress_mode(&self) -> StressMode {
        self.stress_mode
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    /// Continuation stage: exponent `2 + theta (p - 2)` and regularisation
    /// `kappa^theta`; the load stays that of the target problem.
    pub fn stage(&self, theta: f64) -> FeProblem {
        FeProblem { theta, ..self.clone() }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn stage_kappa(&self) -> f64 {
        if self.theta == 1.0 {
            self.kernel.kappa()
        } else {
            self.kernel.kappa().powf(self.theta)
        }
    }

    /// Exponent used by the discrete stress in `cell` at `x`.
    fn discrete_exponent(&self, cell: usize, x: [f64; 2]) -> f64 {
        let p = match self.stress_mode {
            StressMode::Localized => self.localized.value(cell),
            StressMode::Pointwise => self.exponent.value_in_cell(cell, x),
        };
        2.0 + self.theta * (p - 2.0)
    }

    /// Load vector over all velocity dofs.
    fn assemble_load(&self) -> Vec<f64> {
        let space = &self.space;
        let mesh = space.mesh();
        let rule = space.quadrature();
        let element = space.velocity_map().element;
        let tab: Vec<LocalShape> = rule.points.iter().map(|b| element.shape(b)).collect();
        let locals: Vec<[f64; 12]> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let geo = space.geometry(k);
                let mut loc = [0.0; 12];
                for (q, (b, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let x = mesh.to_physical(k, b);
                    let wk = w * geo.area;
                    let sh = &tab[q];
                    match &self.rhs {
                        RhsFunctional::Manufactured(pair) => {
                            let p = self.exponent.value_in_cell(k, x);
                            let s = self.kernel.at_exponent(p).stress(&pair.sym_gradient(x));
                            let qx = pair.pressure(x);
                            for i in 0..sh.len {
                                let g = geo.gradient(&sh.dbary[i]);
                                for c in 0..2 {
                                    loc[2 * i + c] += wk * (s.ddot(&basis_sym_grad(g, c)) - qx * g[c]);
                                }
                            }
                        }
                        RhsFunctional::ExplicitForce(f) => {
                            let fx = f(x);
                            for i in 0..sh.len {
                                for c in 0..2 {
                                    loc[2 * i + c] += wk * fx[c] * sh.values[i];
                                }
                            }
                        }
                    }
                }
                loc
            })
            .collect();
        let mut load = vec![0.0; space.num_velocity_dofs()];
        for (k, loc) in locals.iter().enumerate() {
            for (i, &n) in space.velocity_map().cell_nodes(k).iter().enumerate() {
                load[2 * n] += loc[2 * i];
                load[2 * n + 1] += loc[2 * i + 1];
            }
        }
        load
    }

    /// `<f, phi_j>` for every velocity dof (boundary dofs included).
    pub fn load_vector(&self) -> &[f64] {
        &self.load
    }

    fn cell_output(&self, k: usize, vel: &[f64], pres: &[f64], tab: &[LocalShape], with_matrix: bool) -> Result<CellOutput, SolverError> {
        let space = &self.space;
        let mesh = space.mesh();
        let rule = space.quadrature();
        let geo = space.geometry(k);
        let nodes = space.velocity_map().cell_nodes(k);
        let verts = mesh.cells()[k];
        let nl = nodes.len();
        let kappa = self.stage_kappa();
        let base = NFunctionKernel::new(kappa, self.kernel.mu(), 2.0)?;
        let mut out = CellOutput { res_v: [0.0; 12], res_q: [0.0; 3], a: [[0.0; 12]; 12], b: [[0.0; 12]; 3] };
        let mut dphi = [SymTensor2::ZERO; 12];
        let mut grads = [[0.0; 2]; 6];
        for (q, (bary, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let wk = w * geo.area;
            let sh = &tab[q];
            let mut gv = [[0.0; 2]; 2];
            for i in 0..nl {
                grads[i] = geo.gradient(&sh.dbary[i]);
                for c in 0..2 {
                    let u = vel[2 * nodes[i] + c];
                    gv[c][0] += u * grads[i][0];
                    gv[c][1] += u * grads[i][1];
                    dphi[2 * i + c] = basis_sym_grad(grads[i], c);
                }
            }
            let dv = SymTensor2::sym_part(gv);
            let div_v = gv[0][0] + gv[1][1];
            let qh: f64 = (0..3).map(|m| pres[verts[m]] * bary[m]).sum();
            let x = mesh.to_physical(k, bary);
            let kern = base.at_exponent(self.discrete_exponent(k, x));
            let s = kern.stress(&dv);
            for i in 0..nl {
                for c in 0..2 {
                    out.res_v[2 * i + c] += wk * (s.ddot(&dphi[2 * i + c]) - qh * grads[i][c]);
                }
            }
            for m in 0..3 {
                out.res_q[m] -= wk * div_v * bary[m];
            }
            if with_matrix {
                let ds = kern.stress_jacobian(&dv)?;
                for a in 0..2 * nl {
                    let da = ds.apply(&dphi[a]);
                    for b in a..2 * nl {
                        out.a[a][b] += wk * da.ddot(&dphi[b]);
                    }
                }
                for m in 0..3 {
                    for i in 0..nl {
                        for c in 0..2 {
                            out.b[m][2 * i + c] -= wk * bary[m] * grads[i][c];
                        }
                    }
                }
            }
        }
        if with_matrix {
            for a in 0..2 * nl {
                for b in 0..a {
                    out.a[a][b] = out.a[b][a];
                }
            }
        }
        Ok(out)
    }

    fn cell_outputs(&self, state: &DiscreteSolution, with_matrix: bool) -> Result<Vec<CellOutput>, SolverError> {
        self.check_state(state)?;
        let element = self.space.velocity_map().element;
        let tab: Vec<LocalShape> = self.space.quadrature().points.iter().map(|b| element.shape(b)).collect();
        (0..self.space.mesh().num_cells())
            .into_par_iter()
            .map(|k| self.cell_output(k, &state.velocity.coeffs, &state.pressure.coeffs, &tab, with_matrix))
            .collect()
    }

    fn check_state(&self, state: &DiscreteSolution) -> Result<(), SolverError> {
        let (nv, np) = (self.space.num_velocity_dofs(), self.space.num_pressure_dofs());
        if state.velocity.coeffs.len() != nv {
            return Err(SolverError::StateSize { got: state.velocity.coeffs.len(), expected: nv });
        }
        if state.pressure.coeffs.len() != np {
            return Err(SolverError::StateSize { got: state.pressure.coeffs.len(), expected: np });
        }
        Ok(())
    }

    /// Galerkin residual in unknown ordering.
    pub fn assemble_residual(&self, state: &DiscreteSolution) -> Result<Vec<f64>, SolverError> {
        let outs = self.cell_outputs(state, false)?;
        Ok(self.scatter_residual(&outs, state))
    }

    fn scatter_residual(&self, outs: &[CellOutput], state: &DiscreteSolution) -> Vec<f64> {
        let lay = &self.layout;
        let mut r = vec![0.0; lay.len()];
        let mesh = self.space.mesh();
        for (k, out) in outs.iter().enumerate() {
            for (i, &n) in self.space.velocity_map().cell_nodes(k).iter().enumerate() {
                for c in 0..2 {
                    if let Some(g) = lay.velocity_index(2 * n + c) {
                        r[g] += out.res_v[2 * i + c];
                    }
                }
            }
            for (m, &v) in mesh.cells()[k].iter().enumerate() {
                r[lay.pressure_index(v)] += out.res_q[m];
            }
        }
        for (d, f) in self.load.iter().enumerate() {
            if let Some(g) = lay.velocity_index(d) {
                r[g] -= f;
            }
        }
        let mvec = self.space.pressure_basis_integrals();
        let mut mean = 0.0;
        for (k, mk) in mvec.iter().enumerate() {
            r[lay.pressure_index(k)] += mk * state.multiplier;
            mean += mk * state.pressure.coeffs[k];
        }
        r[lay.multiplier_index()] = mean;
        r
    }

    /// Bordered saddle-point Jacobian at `state`.
    pub fn assemble_jacobian(&self, state: &DiscreteSolution) -> Result<CscMatrix, SolverError> {
        let outs = self.cell_outputs(state, true)?;
        Ok(self.scatter_jacobian(&outs))
    }

    fn scatter_jacobian(&self, outs: &[CellOutput]) -> CscMatrix {
        let lay = &self.layout;
        let mesh = self.space.mesh();
        let nl = self.space.velocity_map().element.local_dim();
        let mut t = Vec::with_capacity(outs.len() * (4 * nl * nl + 12 * nl));
        let mut rows = [None; 12];
        for (k, out) in outs.iter().enumerate() {
            for (i, &n) in self.space.velocity_map().cell_nodes(k).iter().enumerate() {
                rows[2 * i] = lay.velocity_index(2 * n);
                rows[2 * i + 1] = lay.velocity_index(2 * n + 1);
            }
            for a in 0..2 * nl {
                let Some(ga) = rows[a] else { continue };
                for b in 0..2 * nl {
                    if let Some(gb) = rows[b] {
                        t.push((ga, gb, out.a[a][b]));
                    }
                }
            }
            for (m, &v) in mesh.cells()[k].iter().enumerate() {
                let gp = lay.pressure_index(v);
                for b in 0..2 * nl {
                    if let Some(gb) = rows[b] {
                        t.push((gp, gb, out.b[m][b]));
                        t.push((gb, gp, out.b[m][b]));
                    }
                }
            }
        }
        let last = lay.multiplier_index();
        for (k, mk) in self.space.pressure_basis_integrals().iter().enumerate() {
            t.push((lay.pressure_index(k), last, *mk));
            t.push((last, lay.pressure_index(k), *mk));
        }
        CscMatrix::from_triplets(lay.len(), lay.len(), &t)
    }

    /// Zero state on this problem's space.
    pub fn zero_state(&self) -> DiscreteSolution {
        DiscreteSolution::zero(&self.space)
    }

    /// Unknown vector of `state`.
    pub fn unknowns(&self, state: &DiscreteSolution) -> Vec<f64> {
        let lay = &self.layout;
        let mut x = vec![0.0; lay.len()];
        for (d, &u) in state.velocity.coeffs.iter().enumerate() {
            if let Some(g) = lay.velocity_index(d) {
                x[g] = u;
            }
        }
        for (k, &p) in state.pressure.coeffs.iter().enumerate() {
            x[lay.pressure_index(k)] = p;
        }
        x[lay.multiplier_index()] = state.multiplier;
        x
    }

    /// Writes an unknown vector back into `state`; boundary velocity dofs are zeroed.
    pub fn set_unknowns(&self, state: &mut DiscreteSolution, x: &[f64]) {
        let lay = &self.layout;
        for (d, u) in state.velocity.coeffs.iter_mut().enumerate() {
            *u = lay.velocity_index(d).map_or(0.0, |g| x[g]);
        }
        for (k, p) in state.pressure.coeffs.iter_mut().enumerate() {
            *p = x[lay.pressure_index(k)];
        }
        state.multiplier = x[lay.multiplier_index()];
    }

    /// `|R(0)|`, the reference for relative residuals (1 when the load vanishes).
    pub fn reference_residual(&self) -> f64 {
        let n = norm2(
            &self
                .load
                .iter()
                .enumerate()
                .filter(|(d, _)| self.layout.velocity_index(*d).is_some())
                .map(|(_, f)| *f)
                .collect::<Vec<_>>(),
        );
        if n > 0.0 {
            n
        } else {
            1.0
        }
    }

    /// `max_k |<div v_h, psi_k>|` over the pressure basis.
    pub fn divergence_defect(&self, state: &DiscreteSolution) -> Result<f64, SolverError> {
        let outs = self.cell_outputs(state, false)?;
        let mut d = vec![0.0; self.space.num_pressure_dofs()];
        for (k, out) in outs.iter().enumerate() {
            for (m, &v) in self.space.mesh().cells()[k].iter().enumerate() {
                d[v] += out.res_q[m];
            }
        }
        Ok(d.iter().fold(0.0, |a, b| a.max(b.abs())))
    }
}

/// Solve of `J x = b` for the bordered system.
pub fn solve_saddle(matrix: &CscMatrix, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    Ok(DirectSolver::new().solve(matrix, rhs)?.solution)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationMode {
    /// Plain Newton first, continuation if it fails.
    Auto,
    Always,
    Never,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub min_step: f64,
    pub continuation: ContinuationMode,
    pub stages: Vec<f64>,
    pub stage_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            max_iter: 30,
            armijo: 1e-4,
            min_step: 1.0 / 1024.0,
            continuation: ContinuationMode::Auto,
            stages: vec![0.25, 0.5, 0.75, 1.0],
            stage_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub theta: f64,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub velocity: FeFunction,
    pub pressure: FeFunction,
    pub multiplier: f64,
    pub newton_iterations: usize,
    /// Relative residual `|R| / |R(0)|` at exit.
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub stages: Vec<StageRecord>,
}

impl DiscreteSolution {
    pub fn zero(space: &Arc<FeSpacePair>) -> Self {
        DiscreteSolution {
            velocity: space.zero_velocity(),
            pressure: space.zero_pressure(),
            multiplier: 0.0,
            newton_iterations: 0,
            final_residual: f64::NAN,
            residual_history: Vec::new(),
            stages: Vec::new(),
        }
    }

    /// Initial guess on `space` interpolated from this solution.
    pub fn transfer_to(&self, space: &Arc<FeSpacePair>) -> Self {
        let mut s = DiscreteSolution::zero(space);
        s.velocity = self.velocity.transfer_to(space);
        s.pressure = self.pressure.transfer_to(space);
        debug_assert_eq!(s.pressure.kind, FieldKind::Pressure);
        s
    }
}

enum StageOutcome {
    Converged,
    Failed,
}

fn newton_stage(
    problem: &FeProblem,
    state: &mut DiscreteSolution,
    tol: f64,
    config: &NewtonConfig,
    reference: f64,
    linear: &mut DirectSolver,
    history: &mut Vec<f64>,
) -> Result<(StageOutcome, usize, f64), SolverError> {
    let mut x = problem.unknowns(state);
    let mut r = problem.assemble_residual(state)?;
    let mut rn = norm2(&r) / reference;
    history.push(rn);
    let mut iterations = 0;
    loop {
        if rn <= tol {
            return Ok((StageOutcome::Converged, iterations, rn));
        }
        if iterations == config.max_iter {
            return Ok((StageOutcome::Failed, iterations, rn));
        }
        let jac = problem.assemble_jacobian(state)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = match linear.solve(&jac, &rhs) {
            Ok(s) => s.solution,
            Err(LinearSolveError::Inaccurate { .. }) => return Ok((StageOutcome::Failed, iterations, rn)),
            Err(e) => return Err(e.into()),
        };
        let mut step = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + step * d).collect();
            problem.set_unknowns(state, &trial);
            let rt = problem.assemble_residual(state)?;
            let rtn = norm2(&rt) / reference;
            if rtn.is_finite() && rtn <= (1.0 - config.armijo * step) * rn {
                x = trial;
                r = rt;
                rn = rtn;
                break true;
            }
            step *= 0.5;
            if step < config.min_step {
                break false;
            }
        };
        if !accepted {
            problem.set_unknowns(state, &x);
            return Ok((StageOutcome::Failed, iterations, rn));
        }
        iterations += 1;
        history.push(rn);
    }
}

/// Damped Newton for the discrete problem.
///
/// Each accepted step satisfies the Armijo condition on the residual norm.
/// With [`ContinuationMode::Auto`], a failed plain solve restarts from the
/// initial guess along the stages `theta` in `config.stages`, each warm
/// started from the previous one.
pub fn newton_solve(problem: &FeProblem, config: &NewtonConfig, initial: Option<&DiscreteSolution>) -> Result<DiscreteSolution, SolverError> {
    if problem.kernel.kappa() <= 0.0 {
        return Err(SolverError::ZeroRegularization);
    }
    let start = match initial {
        Some(s) => {
            problem.check_state(s)?;
            let mut s = s.clone();
            s.multiplier = 0.0;
            s
        }
        None => problem.zero_state(),
    };
    let reference = problem.reference_residual();
    let mut linear = DirectSolver::new();
    let mut history = Vec::new();
    let mut stages = Vec::new();
    let mut total = 0;

    if config.continuation != ContinuationMode::Always {
        let mut state = start.clone();
        let (outcome, its, rn) = newton_stage(problem, &mut state, config.tol, config, reference, &mut linear, &mut history)?;
        total += its;
        stages.push(StageRecord { theta: 1.0, iterations: its, relative_residual: rn, converged: matches!(outcome, StageOutcome::Converged) });
        if let StageOutcome::Converged = outcome {
            return Ok(finish(state, total, rn, history, stages));
        }
        if config.continuation == ContinuationMode::Never {
            return Err(SolverError::NotConverged { history, stages });
        }
    }

    let mut state = start;
    let n = config.stages.len();
    for (i, &theta) in config.stages.iter().enumerate() {
        let last = i + 1 == n;
        let stage = problem.stage(theta);
        let tol = if last { config.tol } else { config.stage_tol };
        let (outcome, its, rn) = newton_stage(&stage, &mut state, tol, config, reference, &mut linear, &mut history)?;
        total += its;
        let ok = matches!(outcome, StageOutcome::Converged);
        stages.push(StageRecord { theta, iterations: its, relative_residual: rn, converged: ok });
        if !ok {
            return Err(SolverError::NotConverged { history, stages });
        }
        if last {
            return Ok(finish(state, total, rn, history, stages));
        }
    }
    Err(SolverError::InvalidProblem("empty continuation schedule".into()))
}

fn finish(mut state: DiscreteSolution, iterations: usize, rn: f64, history: Vec<f64>, stages: Vec<StageRecord>) -> DiscreteSolution {
    state.newton_iterations = iterations;
    state.final_residual = rn;
    state.residual_history = history;
    state.stages = stages;
    state
}

/// Scalar element used by the velocity space of `problem`.
pub fn velocity_element(problem: &FeProblem) -> ScalarElement {
    problem.space.velocity_map().element
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentSpec;
    use crate::femspace::PairKind;
    use crate::mesh::Triangulation;
    use crate::quadrature::TriangleRule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, kind: PairKind) -> Arc<FeSpacePair> {
        FeSpacePair::build(Arc::new(Triangulation::unit_square(n)), kind)
    }

    fn problem(n: usize, kind: PairKind, spec: ExponentSpec, kappa: f64, mode: StressMode) -> FeProblem {
        let s = space(n, kind);
        let rhs = RhsFunctional::manufactured(Arc::new(CurlBubbleSine), &s).unwrap();
        FeProblem::new(s, ExponentField::from_spec(&spec).unwrap(), kappa, 1.0, rhs, mode).unwrap()
    }

    fn sine(delta: f64) -> ExponentSpec {
        ExponentSpec::Sine2d { p_c: 2.0, delta, frequency: 1.0 }
    }

    fn random_state(p: &FeProblem, seed: u64, amp: f64) -> DiscreteSolution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = p.zero_state();
        let x: Vec<f64> = (0..p.layout().len()).map(|_| amp * (rng.gen::<f64>() - 0.5)).collect();
        p.set_unknowns(&mut s, &x);
        s
    }

    #[test]
    fn manufactured_gradient_matches_differences() {
        let m = CurlBubbleSine;
        let h = 1e-6;
        for x in [[0.3, 0.7], [0.55, 0.12], [0.9, 0.4]] {
            let g = m.velocity_gradient(x);
            for d in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                let (vp, vm) = (m.velocity(xp), m.velocity(xm));
                for c in 0..2 {
                    assert!(((vp[c] - vm[c]) / (2.0 * h) - g[c][d]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn non_solenoidal_pair_rejected() {
        struct Dilation;
        impl ManufacturedPair for Dilation {
            fn label(&self) -> &str {
                "dilation"
            }
            fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
                let b = x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
                [b, b]
            }
            fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
                let gx = (1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]);
                let gy = x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]);
                [[gx, gy], [gx, gy]]
            }
            fn pressure(&self, _: [f64; 2]) -> f64 {
                0.0
            }
        }
        let s = space(4, PairKind::Mini);
        assert!(matches!(RhsFunctional::manufactured(Arc::new(Dilation), &s), Err(SolverError::InvalidManufactured(_))));
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let s = space(4, PairKind::TaylorHood);
        let rhs = RhsFunctional::manufactured(Arc::new(ZeroPair), &s).unwrap();
        let p = FeProblem::new(s, ExponentField::constant(2.5).unwrap(), 1.0, 1.0, rhs, StressMode::Localized).unwrap();
        let r = p.assemble_residual(&p.zero_state()).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        let sol = newton_solve(&p, &NewtonConfig::default(), None).unwrap();
        assert_eq!(sol.newton_iterations, 0);
        assert!(sol.velocity.coeffs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn load_matches_high_degree_quadrature() {
        // ξ = a fixed interior P2 vertex basis function in direction x
        let s = space(4, PairKind::TaylorHood);
        let spec = sine(0.3);
        let field = ExponentField::from_spec(&spec).unwrap();
        let rhs = RhsFunctional::manufactured(Arc::new(CurlBubbleSine), &s).unwrap();
        let p = FeProblem::new(s.clone(), field.clone(), 1.0, 1.0, rhs, StressMode::Localized).unwrap();
        let node = 12; // interior vertex (2, 2)
        assert!(!s.velocity_map().is_boundary(node));
        let fine = TriangleRule::collapsed_gauss(14);
        let kern = NFunctionKernel::new(1.0, 1.0, 2.0).unwrap();
        let m = CurlBubbleSine;
        let mut oracle = 0.0;
        for &k in s.mesh().vertex_cells(node) {
            let geo = s.geometry(k);
            let local = s.velocity_map().cell_nodes(k).iter().position(|&n| n == node).unwrap();
            for (b, w) in fine.points.iter().zip(&fine.weights) {
                let x = s.mesh().to_physical(k, b);
                let sh = ScalarElement::P2.shape(b);
                let g = geo.gradient(&sh.dbary[local]);
                let stress = kern.at_exponent(field.value(x)).stress(&m.sym_gradient(x));
                oracle += w * geo.area * (stress.ddot(&basis_sym_grad(g, 0)) - m.pressure(x) * g[0]);
            }
        }
        let got = p.load_vector()[2 * node];
        assert!((got - oracle).abs() <= 1e-6 * oracle.abs().max(1e-3), "{got} vs {oracle}");
    }

    #[test]
    fn newtonian_load_equals_strong_form() {
        // p = 2, kappa = 0: <f, xi> = int (-(mu/2) lap v + grad q) . xi
        let s = space(4, PairKind::TaylorHood);
        let rhs = RhsFunctional::manufactured(Arc::new(CurlBubbleSine), &s).unwrap();
        let p = FeProblem::new(s.clone(), ExponentField::constant(2.0).unwrap(), 0.0, 1.0, rhs, StressMode::Localized).unwrap();
        let strong = |x: [f64; 2]| -> [f64; 2] {
            let (a, b) = (bump(x[0]), bump(x[1]));
            let (a3, b3) = (-12.0 + 24.0 * x[0], -12.0 + 24.0 * x[1]);
            let lap0 = a[2] * b[1] + a[0] * b3;
            let lap1 = -(a3 * b[0] + a[1] * b[2]);
            let t = 2.0 * PI;
            let gq = [t * (t * x[0]).cos() * (t * x[1]).cos(), -t * (t * x[0]).sin() * (t * x[1]).sin()];
            [-0.5 * lap0 + gq[0], -0.5 * lap1 + gq[1]]
        };
        let fine = TriangleRule::collapsed_gauss(12);
        let sf = s.with_quadrature(fine);
        let pf = FeProblem::new(sf, ExponentField::constant(2.0).unwrap(), 0.0, 1.0, RhsFunctional::ExplicitForce(Arc::new(strong)), StressMode::Localized).unwrap();
        for d in 0..s.num_velocity_dofs() {
            if !s.is_boundary_velocity_dof(d) {
                assert!((p.load_vector()[d] - pf.load_vector()[d]).abs() < 1e-7, "dof {d}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for (kind, mode) in [(PairKind::TaylorHood, StressMode::Localized), (PairKind::Mini, StressMode::Pointwise)] {
            let p = problem(3, kind, sine(0.6), 0.5, mode);
            let state = random_state(&p, 3, 2.0);
            let jac = p.assemble_jacobian(&state).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let dir: Vec<f64> = (0..p.layout().len()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let x0 = p.unknowns(&state);
            let eps = 1e-6;
            let eval = |sgn: f64| {
                let mut s = state.clone();
                let x: Vec<f64> = x0.iter().zip(&dir).map(|(a, d)| a + sgn * eps * d).collect();
                p.set_unknowns(&mut s, &x);
                p.assemble_residual(&s).unwrap()
            };
            let (rp, rm) = (eval(1.0), eval(-1.0));
            let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
            let jd = jac.matvec(&dir);
            let err: Vec<f64> = fd.iter().zip(&jd).map(|(a, b)| a - b).collect();
            assert!(norm2(&err) <= 1e-5 * norm2(&jd), "{kind:?}: {}", norm2(&err) / norm2(&jd));
        }
    }

    #[test]
    fn jacobian_is_symmetric() {
        let p = problem(4, PairKind::TaylorHood, sine(0.3), 1.0, StressMode::Localized);
        let jac = p.assemble_jacobian(&random_state(&p, 5, 1.0)).unwrap();
        assert!(jac.max_asymmetry() <= 1e-12 * jac.max_abs());
    }

    #[test]
    fn newtonian_jacobian_is_state_independent() {
        let p = problem(3, PairKind::Mini, ExponentSpec::Constant { p: 2.0 }, 0.7, StressMode::Localized);
        let a = p.assemble_jacobian(&p.zero_state()).unwrap();
        let b = p.assemble_jacobian(&random_state(&p, 9, 3.0)).unwrap();
        let diff = a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-14 * a.max_abs());
    }

    #[test]
    fn velocity_block_positive_on_discrete_kernel() {
        // smallest eigenvalue of Z^T A Z with Z spanning ker B
        let p = problem(2, PairKind::TaylorHood, sine(0.4), 0.3, StressMode::Localized);
        let jac = p.assemble_jacobian(&random_state(&p, 21, 4.0)).unwrap().to_dense();
        let nf = p.layout().num_free_velocity;
        let np = p.layout().num_pressure;
        let a = jac.submatrix(0, 0, nf, nf).to_owned();
        let b = jac.submatrix(nf, 0, np, nf).to_owned();
        let svd = b.svd().unwrap();
        let v = svd.V();
        let s = svd.S();
        let rank = (0..np.min(nf)).filter(|&i| s[i] > 1e-10).count();
        let z = v.submatrix(0, rank, nf, nf - rank).to_owned();
        let za = z.transpose() * &a * &z;
        let eig = za.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(eig[0] > 0.0);
    }

    #[test]
    fn stokes_converges_in_one_iteration() {
        for kind in [PairKind::TaylorHood, PairKind::Mini] {
            let p = problem(8, kind, ExponentSpec::Constant { p: 2.0 }, 0.5, StressMode::Localized);
            let sol = newton_solve(&p, &NewtonConfig::default(), None).unwrap();
            assert_eq!(sol.newton_iterations, 1);
            assert!(sol.final_residual <= 1e-10);
            // one-shot linear solve
            let jac = p.assemble_jacobian(&p.zero_state()).unwrap();
            let r0 = p.assemble_residual(&p.zero_state()).unwrap();
            let x = solve_saddle(&jac, &r0.iter().map(|v| -v).collect::<Vec<_>>()).unwrap();
            let xs = p.unknowns(&sol);
            assert!(x.iter().zip(&xs).all(|(a, b)| (a - b).abs() < 1e-12));
            let mean: f64 = sol.pressure.integral()[0];
            assert!(mean.abs() < 1e-12);
            assert!(sol.multiplier.abs() < 1e-10);
        }
    }

    #[test]
    fn p25_regression_on_h16() {
        let p = problem(16, PairKind::TaylorHood, ExponentSpec::Constant { p: 2.5 }, 1.0, StressMode::Localized);
        let sol = newton_solve(&p, &NewtonConfig::default(), None).unwrap();
        assert!(sol.newton_iterations <= 15, "{}", sol.newton_iterations);
        assert!(sol.final_residual <= 1e-10);
        assert_eq!(sol.stages.len(), 1);
        for w in sol.residual_history.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(p.divergence_defect(&sol).unwrap() <= 1e-9);
    }

    #[test]
    fn small_kappa_solved_with_continuation() {
        let p = problem(8, PairKind::TaylorHood, sine(0.3), 1e-4, StressMode::Localized);
        let config = NewtonConfig { continuation: ContinuationMode::Always, ..NewtonConfig::default() };
        let sol = newton_solve(&p, &config, None).unwrap();
        assert!(sol.stages.len() <= 4);
        assert!(sol.stages.iter().all(|s| s.converged));
        assert!(sol.final_residual <= 1e-10);
    }

    #[test]
    fn galerkin_orthogonality() {
        // <S(Dv) - S_T(Dv_h), D xi_h> - <div xi_h, q - q_h> = 0 for discrete xi_h;
        // with the same quadrature this is the velocity residual at the solution
        let p = problem(8, PairKind::TaylorHood, sine(0.3), 1.0, StressMode::Localized);
        let sol = newton_solve(&p, &NewtonConfig::default(), None).unwrap();
        let r = p.assemble_residual(&sol).unwrap();
        let nf = p.layout().num_free_velocity;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let xi: Vec<f64> = (0..nf).map(|_| rng.gen::<f64>() - 0.5).collect();
            let val: f64 = xi.iter().zip(&r[..nf]).map(|(a, b)| a * b).sum();
            assert!(val.abs() <= 10.0 * 1e-10 * p.reference_residual() * norm2(&xi));
        }
    }

    #[test]
    fn zero_kappa_rejected_by_newton() {
        let p = problem(2, PairKind::Mini, ExponentSpec::Constant { p: 1.8 }, 0.0, StressMode::Localized);
        assert!(matches!(newton_solve(&p, &NewtonConfig::default(), None), Err(SolverError::ZeroRegularization)));
    }

    #[test]
    fn residual_rejects_wrong_state() {
        let p = problem(2, PairKind::Mini, ExponentSpec::Constant { p: 2.0 }, 1.0, StressMode::Localized);
        let other = DiscreteSolution::zero(&space(3, PairKind::Mini));
        assert!(matches!(p.assemble_residual(&other), Err(SolverError::StateSize { .. })));
    }
}
