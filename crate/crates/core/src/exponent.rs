//! Variable exponents `p(x)` on the unit square and their cellwise localisation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Triangulation;
use crate::quadrature::TriangleRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("exponent bounds must satisfy 1 < p_minus <= p_plus < inf, got [{0}, {1}]")]
    Bounds(f64, f64),
    #[error("Hoelder exponent must lie in (0, 1], got {0}")]
    HolderExponent(f64),
    #[error("invalid catalog parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("piecewise exponent has {got} values for a mesh with {cells} cells")]
    CellCount { got: usize, cells: usize },
}

/// Catalog entry for the built-in exponent fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSpec {
    Constant { p: f64 },
    /// `p_c + delta sin(2 pi f x) sin(2 pi f y)`.
    Sine2d { p_c: f64, delta: f64, frequency: f64 },
    /// `p_c + delta (2 (|x - center| / R)^alpha - 1)` with `R` the largest
    /// distance from `center` to a corner of the unit square.
    HolderCusp { p_c: f64, delta: f64, alpha: f64, center: [f64; 2] },
}

type PointFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Evaluator {
    Analytic(PointFn),
    Piecewise { mesh: Arc<Triangulation>, values: Arc<Vec<f64>> },
    Conjugate(Box<Evaluator>),
}

impl Evaluator {
    fn at(&self, x: [f64; 2]) -> f64 {
        match self {
            Evaluator::Analytic(f) => f(x),
            // lower envelope on shared edges and vertices
            Evaluator::Piecewise { mesh, values } => {
                mesh.locate(x).iter().map(|&k| values[k]).fold(f64::INFINITY, f64::min)
            }
            Evaluator::Conjugate(inner) => {
                let p = inner.at(x);
                p / (p - 1.0)
            }
        }
    }

    fn in_cell(&self, cell: usize, x: [f64; 2]) -> f64 {
        match self {
            Evaluator::Analytic(f) => f(x),
            Evaluator::Piecewise { values, .. } => values[cell],
            Evaluator::Conjugate(inner) => {
                let p = inner.in_cell(cell, x);
                p / (p - 1.0)
            }
        }
    }
}

/// A variable exponent with its bounds and Hoelder data.
#[derive(Clone)]
pub struct ExponentField {
    evaluator: Evaluator,
    p_minus: f64,
    p_plus: f64,
    alpha: f64,
    holder_seminorm: f64,
    seminorm_estimated: bool,
    label: String,
}

impl fmt::Debug for ExponentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentField")
            .field("label", &self.label)
            .field("p_minus", &self.p_minus)
            .field("p_plus", &self.p_plus)
            .field("alpha", &self.alpha)
            .field("holder_seminorm", &self.holder_seminorm)
            .field("seminorm_estimated", &self.seminorm_estimated)
            .finish()
    }
}

fn check_bounds(p_minus: f64, p_plus: f64, alpha: f64) -> Result<(), ExponentError> {
    if !(p_minus > 1.0 && p_minus <= p_plus && p_plus.is_finite()) {
        return Err(ExponentError::Bounds(p_minus, p_plus));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ExponentError::HolderExponent(alpha));
    }
    Ok(())
}

impl ExponentField {
    /// Wraps a user function. `holder_seminorm` is `[p]_alpha`; pass
    /// `estimated = true` when it is not an analytic bound.
    pub fn analytic<F>(
        label: impl Into<String>,
        f: F,
        p_minus: f64,
        p_plus: f64,
        alpha: f64,
        holder_seminorm: f64,
        estimated: bool,
    ) -> Result<Self, ExponentError>
    where
        F: Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    {
        check_bounds(p_minus, p_plus, alpha)?;
        Ok(ExponentField {
            evaluator: Evaluator::Analytic(Arc::new(f)),
            p_minus,
            p_plus,
            alpha,
            holder_seminorm,
            seminorm_estimated: estimated,
            label: label.into(),
        })
    }

    pub fn constant(p: f64) -> Result<Self, ExponentError> {
        ExponentField::analytic(format!("constant({p})"), move |_| p, p, p, 1.0, 0.0, false)
    }

    pub fn from_spec(spec: &ExponentSpec) -> Result<Self, ExponentError> {
        match *spec {
            ExponentSpec::Constant { p } => ExponentField::constant(p),
            ExponentSpec::Sine2d { p_c, delta, frequency } => {
                if !(frequency > 0.0 && frequency.is_finite()) {
                    return Err(ExponentError::Parameter { name: "frequency", value: frequency });
                }
                let w = 2.0 * PI * frequency;
                let d = delta.abs();
                ExponentField::analytic(
                    format!("sine2d({p_c}, {delta}, {frequency})"),
                    move |x| p_c + delta * (w * x[0]).sin() * (w * x[1]).sin(),
                    p_c - d,
                    p_c + d,
                    1.0,
                    w * d,
                    false,
                )
            }
            ExponentSpec::HolderCusp { p_c, delta, alpha, center } => {
                if !(delta >= 0.0) {
                    return Err(ExponentError::Parameter { name: "delta", value: delta });
                }
                if !(0.0..=1.0).contains(&center[0]) || !(0.0..=1.0).contains(&center[1]) {
                    return Err(ExponentError::Parameter { name: "center", value: center[0] });
                }
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(ExponentError::HolderExponent(alpha));
                }
                let radius = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
                    .iter()
                    .map(|c: &[f64; 2]| ((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2)).sqrt())
                    .fold(0.0, f64::max);
                let scale = 2.0 * delta / radius.powf(alpha);
                ExponentField::analytic(
                    format!("holder_cusp({p_c}, {delta}, {alpha}, [{}, {}])", center[0], center[1]),
                    move |x| {
                        let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                        p_c - delta + scale * r.powf(alpha)
                    },
                    p_c - delta,
                    p_c + delta,
                    alpha,
                    // |r^a - s^a| <= |r - s|^a <= |x - y|^a
                    scale,
                    false,
                )
            }
        }
    }

    /// Field backed by cellwise-constant values on `mesh`.
    pub fn from_piecewise(mesh: Arc<Triangulation>, pw: &PiecewiseExponent) -> Result<Self, ExponentError> {
        if pw.values.len() != mesh.num_cells() {
            return Err(ExponentError::CellCount { got: pw.values.len(), cells: mesh.num_cells() });
        }
        let p_minus = pw.values.iter().copied().fold(f64::INFINITY, f64::min);
        let p_plus = pw.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        check_bounds(p_minus, p_plus, 1.0)?;
        Ok(ExponentField {
            evaluator: Evaluator::Piecewise { mesh, values: Arc::new(pw.values.clone()) },
            p_minus,
            p_plus,
            alpha: 1.0,
            holder_seminorm: f64::INFINITY,
            seminorm_estimated: true,
            label: "piecewise".into(),
        })
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.evaluator.at(x)
    }

    /// Value seen from inside `cell`; differs from [`value`](Self::value) only
    /// for cellwise-defined fields on cell boundaries.
    pub fn value_in_cell(&self, cell: usize, x: [f64; 2]) -> f64 {
        self.evaluator.in_cell(cell, x)
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn holder_seminorm(&self) -> f64 {
        self.holder_seminorm
    }

    pub fn seminorm_estimated(&self) -> bool {
        self.seminorm_estimated
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }
}

/// Conjugate exponent field `p' = p / (p - 1)`.
pub fn conjugate_field(field: &ExponentField) -> Result<ExponentField, ExponentError> {
    if !(field.p_minus > 1.0) {
        return Err(ExponentError::Bounds(field.p_minus, field.p_plus));
    }
    let conj = |p: f64| p / (p - 1.0);
    // |p'(x) - p'(y)| = |p(x) - p(y)| / ((p(x) - 1)(p(y) - 1))
    let seminorm = field.holder_seminorm / (field.p_minus - 1.0).powi(2);
    Ok(ExponentField {
        evaluator: Evaluator::Conjugate(Box::new(field.evaluator.clone())),
        p_minus: conj(field.p_plus),
        p_plus: conj(field.p_minus),
        alpha: field.alpha,
        holder_seminorm: seminorm,
        seminorm_estimated: field.seminorm_estimated,
        label: format!("conjugate({})", field.label),
    })
}

/// Cellwise-constant exponent `p_T = sum_K p(x_K) chi_K` with anchors `x_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExponent {
    pub values: Vec<f64>,
    pub anchors: Vec<[f64; 2]>,
}

impl PiecewiseExponent {
    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cellwise conjugate `p_T'`, same anchors.
    pub fn conjugate(&self) -> PiecewiseExponent {
        PiecewiseExponent {
            values: self.values.iter().map(|&p| p / (p - 1.0)).collect(),
            anchors: self.anchors.clone(),
        }
    }

    /// Blend `2 + theta (p_K - 2)`, used by the solver's continuation.
    pub fn blend_towards_two(&self, theta: f64) -> PiecewiseExponent {
        PiecewiseExponent {
            values: self.values.iter().map(|&p| 2.0 + theta * (p - 2.0)).collect(),
            anchors: self.anchors.clone(),
        }
    }
}

/// Sample points used to approximate the essential infimum on a cell:
/// the three vertices, the degree-8 quadrature nodes, the barycentre and
/// the quarter points of every edge (29 points, symmetric).
pub fn anchor_samples() -> Vec<[f64; 3]> {
    let mut pts = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    pts.extend(TriangleRule::degree8().points);
    pts.push([1.0 / 3.0; 3]);
    for e in 0..3 {
        for t in [0.25, 0.5, 0.75] {
            let mut b = [0.0; 3];
            b[(e + 1) % 3] = t;
            b[(e + 2) % 3] = 1.0 - t;
            pts.push(b);
        }
    }
    pts
}

/// Localises `field` to `p_T`: on every cell the anchor is the sample point
/// with the smallest exponent (first one on ties).
pub fn localize(field: &ExponentField, mesh: &Triangulation) -> PiecewiseExponent {
    let samples = anchor_samples();
    let mut values = Vec::with_capacity(mesh.num_cells());
    let mut anchors = Vec::with_capacity(mesh.num_cells());
    for k in 0..mesh.num_cells() {
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for b in &samples {
            let x = mesh.to_physical(k, b);
            let p = field.value_in_cell(k, x);
            if p < best.0 {
                best = (p, x);
            }
        }
        values.push(best.0);
        anchors.push(best.1);
    }
    PiecewiseExponent { values, anchors }
}

/// Empirical lower bound for the log-Hoelder constant of `1/p`:
/// `sup |1/p(x) - 1/p(y)| log(e + 1/|x - y|)` over sampled pairs in the unit square.
///
/// Pairs are a fixed 3x3 grid (all combinations), uniform pairs, and close
/// pairs with log-uniform separation; the generator is seeded, so the result
/// is reproducible.
pub fn log_holder_estimate(field: &ExponentField, n_pairs: usize) -> f64 {
    let term = |x: [f64; 2], y: [f64; 2]| {
        let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        if r == 0.0 {
            return 0.0;
        }
        (1.0 / field.value(x) - 1.0 / field.value(y)).abs() * (std::f64::consts::E + 1.0 / r).ln()
    };
    let grid: Vec<[f64; 2]> = (0..9).map(|i| [(i % 3) as f64 * 0.5, (i / 3) as f64 * 0.5]).collect();
    let mut best = 0.0f64;
    for (i, &x) in grid.iter().enumerate() {
        for &y in &grid[i + 1..] {
            best = best.max(term(x, y));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x10c_401d);
    for i in 0..n_pairs {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let y = if i % 3 == 0 {
            [rng.gen::<f64>(), rng.gen::<f64>()]
        } else {
            let r = 10f64.powf(rng.gen_range(-6.0..-0.3));
            let theta = rng.gen_range(0.0..2.0 * PI);
            [(x[0] + r * theta.cos()).clamp(0.0, 1.0), (x[1] + r * theta.sin()).clamp(0.0, 1.0)]
        };
        best = best.max(term(x, y));
    }
    best
}

/// Largest observed `|p(x) - p(y)| / (|x - y|^alpha [p]_alpha)` over seeded
/// random pairs; at most 1 when the stored seminorm is a valid bound.
pub fn holder_ratio(field: &ExponentField, n_pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..n_pairs {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let y = if i % 2 == 0 {
            [rng.gen::<f64>(), rng.gen::<f64>()]
        } else {
            let r = 10f64.powf(rng.gen_range(-5.0..-0.5));
            let theta = rng.gen_range(0.0..2.0 * PI);
            [(x[0] + r * theta.cos()).clamp(0.0, 1.0), (x[1] + r * theta.sin()).clamp(0.0, 1.0)]
        };
        let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        if r == 0.0 {
            continue;
        }
        let ratio = (field.value(x) - field.value(y)).abs() / (r.powf(field.alpha) * field.holder_seminorm);
        worst = worst.max(ratio);
    }
    worst
}
