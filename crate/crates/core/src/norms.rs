//! Modulars, Luxemburg norms, the quasi-norm error and convergence rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponent::{conjugate_field, ExponentError, ExponentField, PiecewiseExponent};
use crate::femspace::{FeFunction, FieldKind};
use crate::mesh::Triangulation;
use crate::orlicz::{NFunctionKernel, SymTensor2};
use crate::quadrature::TriangleRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("modular is not finite")]
    NonFinite,
    #[error("error values must be positive, got {0}")]
    NonPositiveError(f64),
    #[error("mesh sizes must decrease strictly, got {0} then {1}")]
    MeshSizeOrder(f64, f64),
    #[error("at least two records are needed, got {0}")]
    TooFewRecords(usize),
    #[error("expected a {0:?} function")]
    WrongField(FieldKind),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

/// Exponent used to weight a modular.
#[derive(Clone, Copy, Debug)]
pub enum Exponent<'a> {
    Constant(f64),
    Field(&'a ExponentField),
    /// Cellwise-constant `p_T`.
    Piecewise(&'a PiecewiseExponent),
}

impl Exponent<'_> {
    pub fn value(&self, cell: usize, x: [f64; 2]) -> f64 {
        match self {
            Exponent::Constant(p) => *p,
            Exponent::Field(f) => f.value_in_cell(cell, x),
            Exponent::Piecewise(pw) => pw.value(cell),
        }
    }
}

/// `|f|` and `p` sampled at the quadrature points of a mesh, with weights
/// `w_q |K|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub exponents: Vec<f64>,
}

impl SampledField {
    /// `f(cell, x)` is evaluated at every quadrature point of every cell.
    pub fn new<F>(mesh: &Triangulation, rule: &TriangleRule, f: F, exponent: Exponent<'_>) -> Self
    where
        F: Fn(usize, &[f64; 3], [f64; 2]) -> f64 + Sync,
    {
        let per_cell: Vec<Vec<(f64, f64, f64)>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let area = mesh.cell_size(k).area;
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(b, w)| {
                        let x = mesh.to_physical(k, b);
                        (w * area, f(k, b, x).abs(), exponent.value(k, x))
                    })
                    .collect()
            })
            .collect();
        let mut s = SampledField { weights: Vec::new(), values: Vec::new(), exponents: Vec::new() };
        for (w, v, p) in per_cell.into_iter().flatten() {
            s.weights.push(w);
            s.values.push(v);
            s.exponents.push(p);
        }
        s
    }

    /// `int |f / lambda|^p`.
    pub fn modular_scaled(&self, lambda: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.values)
            .zip(&self.exponents)
            .map(|((w, v), p)| if *v == 0.0 { 0.0 } else { w * (v / lambda).powf(*p) })
            .sum()
    }

    pub fn modular(&self) -> f64 {
        self.modular_scaled(1.0)
    }

    /// `inf { lambda > 0 : modular(f / lambda) <= 1 }` by bisection to
    /// relative tolerance `1e-10`.
    pub fn luxemburg(&self) -> Result<f64, NormError> {
        if self.values.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let m = |l: f64| self.modular_scaled(l);
        if !m(1.0).is_finite() {
            return Err(NormError::NonFinite);
        }
        let (mut lo, mut hi) = (1.0, 1.0);
        if m(1.0) > 1.0 {
            while m(hi) > 1.0 {
                lo = hi;
                hi *= 2.0;
            }
        } else {
            while m(lo) <= 1.0 {
                hi = lo;
                lo *= 0.5;
                if lo < 1e-300 {
                    return Ok(0.0);
                }
            }
        }
        while hi - lo > 1e-10 * hi {
            let mid = 0.5 * (lo + hi);
            if m(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `int_Omega |f|^p` on `mesh` with `rule`.
pub fn modular<F: Fn([f64; 2]) -> f64 + Sync>(mesh: &Triangulation, rule: &TriangleRule, f: F, exponent: Exponent<'_>) -> f64 {
    SampledField::new(mesh, rule, |_, _, x| f(x), exponent).modular()
}

pub fn luxemburg_norm<F: Fn([f64; 2]) -> f64 + Sync>(
    mesh: &Triangulation,
    rule: &TriangleRule,
    f: F,
    exponent: Exponent<'_>,
) -> Result<f64, NormError> {
    SampledField::new(mesh, rule, |_, _, x| f(x), exponent).luxemburg()
}

fn velocity_tensors<'a, G>(v_h: &'a FeFunction, exact: &'a G) -> impl Fn(usize, &[f64; 3], [f64; 2]) -> (SymTensor2, SymTensor2) + 'a
where
    G: Fn([f64; 2]) -> SymTensor2 + Sync,
{
    move |k, b, x| {
        let dh = v_h.evaluate(k, b).expect("quadrature point inside cell").sym_gradient;
        (exact(x), dh)
    }
}

/// `( sum_K int_K |F(x_K, Dv) - F(x_K, Dv_h)|^2 )^(1/2)` with the anchor
/// exponents of `localized` and the regularisation of `kernel`.
pub fn quasinorm_error<G>(exact_sym_grad: G, v_h: &FeFunction, localized: &PiecewiseExponent, kernel: &NFunctionKernel) -> Result<f64, NormError>
where
    G: Fn([f64; 2]) -> SymTensor2 + Sync,
{
    quasinorm_with(exact_sym_grad, v_h, kernel, Exponent::Piecewise(localized))
}

/// Diagnostic variant with the exponent taken at each quadrature point.
pub fn quasinorm_error_pointwise<G>(exact_sym_grad: G, v_h: &FeFunction, field: &ExponentField, kernel: &NFunctionKernel) -> Result<f64, NormError>
where
    G: Fn([f64; 2]) -> SymTensor2 + Sync,
{
    quasinorm_with(exact_sym_grad, v_h, kernel, Exponent::Field(field))
}

fn quasinorm_with<G>(exact: G, v_h: &FeFunction, kernel: &NFunctionKernel, exponent: Exponent<'_>) -> Result<f64, NormError>
where
    G: Fn([f64; 2]) -> SymTensor2 + Sync,
{
    if v_h.kind != FieldKind::Velocity {
        return Err(NormError::WrongField(FieldKind::Velocity));
    }
    let tensors = velocity_tensors(v_h, &exact);
    let sampled = SampledField::new(
        v_h.space.mesh(),
        v_h.space.quadrature(),
        |k, b, x| {
            let (d, dh) = tensors(k, b, x);
            let kern = kernel.with_exponent(exponent.value(k, x)).expect("exponent above one");
            (kern.fmap(&d) - kern.fmap(&dh)).norm()
        },
        Exponent::Constant(2.0),
    );
    let m = sampled.modular();
    if !m.is_finite() {
        return Err(NormError::NonFinite);
    }
    Ok(m.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureError {
    pub luxemburg: f64,
    pub modular: f64,
}

/// Luxemburg norm and modular of `q - q_h` in the exponent `p_T'`.
pub fn pressure_error<Q>(exact_q: Q, q_h: &FeFunction, localized: &PiecewiseExponent) -> Result<PressureError, NormError>
where
    Q: Fn([f64; 2]) -> f64 + Sync,
{
    if q_h.kind != FieldKind::Pressure {
        return Err(NormError::WrongField(FieldKind::Pressure));
    }
    let mesh = q_h.space.mesh();
    let field = ExponentField::from_piecewise(mesh.clone(), localized)?;
    let conj = conjugate_field(&field)?;
    let sampled = SampledField::new(
        mesh,
        q_h.space.quadrature(),
        |k, b, x| exact_q(x) - q_h.evaluate(k, b).expect("quadrature point inside cell").value[0],
        Exponent::Field(&conj),
    );
    let modular = sampled.modular();
    if !modular.is_finite() {
        return Err(NormError::NonFinite);
    }
    Ok(PressureError { luxemburg: sampled.luxemburg()?, modular })
}

/// `||g||_{p(.)} / ||g||_{p_T(.)}` for a scalar finite-element function.
pub fn norm_equivalence_ratio(g_h: &FeFunction, field: &ExponentField, localized: &PiecewiseExponent) -> Result<f64, NormError> {
    let mesh = g_h.space.mesh();
    let rule = g_h.space.quadrature();
    let eval = |k: usize, b: &[f64; 3], _: [f64; 2]| g_h.evaluate(k, b).expect("inside").value[0];
    let full = SampledField::new(mesh, rule, eval, Exponent::Field(field)).luxemburg()?;
    let local = SampledField::new(mesh, rule, eval, Exponent::Piecewise(localized)).luxemburg()?;
    Ok(full / local)
}

/// Errors on one mesh level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub h: f64,
    pub velocity_quasinorm_error: f64,
    pub pressure_luxemburg_error: f64,
    pub modular_pressure_error: f64,
}

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for consecutive pairs.
pub fn eoc(h: &[f64], e: &[f64]) -> Result<Vec<f64>, NormError> {
    assert_eq!(h.len(), e.len());
    if h.len() < 2 {
        return Err(NormError::TooFewRecords(h.len()));
    }
    for &v in e {
        if !(v > 0.0) || !v.is_finite() {
            return Err(NormError::NonPositiveError(v));
        }
    }
    for w in h.windows(2) {
        if !(w[1] < w[0]) || !(w[1] > 0.0) {
            return Err(NormError::MeshSizeOrder(w[0], w[1]));
        }
    }
    Ok(h.windows(2).zip(e.windows(2)).map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln()).collect())
}

/// Rates for each error column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EocTable {
    pub velocity: Vec<f64>,
    pub pressure_luxemburg: Vec<f64>,
    pub pressure_modular: Vec<f64>,
}

pub fn eoc_table(records: &[ErrorRecord]) -> Result<EocTable, NormError> {
    let h: Vec<f64> = records.iter().map(|r| r.h).collect();
    let col = |f: fn(&ErrorRecord) -> f64| eoc(&h, &records.iter().map(f).collect::<Vec<_>>());
    Ok(EocTable {
        velocity: col(|r| r.velocity_quasinorm_error)?,
        pressure_luxemburg: col(|r| r.pressure_luxemburg_error)?,
        pressure_modular: col(|r| r.modular_pressure_error)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{localize, ExponentSpec};
    use crate::femspace::{FeSpacePair, PairKind};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn unit(n: usize) -> Triangulation {
        Triangulation::unit_square(n)
    }

    fn rule() -> TriangleRule {
        TriangleRule::degree8()
    }

    /// Adaptive Simpson on `[a, b]`.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    #[test]
    fn modular_examples() {
        let m = unit(4);
        let field = ExponentField::from_spec(&ExponentSpec::Sine2d { p_c: 2.0, delta: 0.3, frequency: 1.0 }).unwrap();
        assert!((modular(&m, &rule(), |_| 1.0, Exponent::Field(&field)) - 1.0).abs() < 1e-13);
        assert!((modular(&m, &rule(), |_| 2.0, Exponent::Constant(2.0)) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn modular_matches_adaptive_oracle() {
        // int_0^1 int_0^1 x^(2 + y) dx dy = int_0^1 1 / (3 + y) dy = ln(4/3)
        let exact = (4.0f64 / 3.0).ln();
        let inner = |y: f64| simpson(&|x: f64| x.powf(2.0 + y), 0.0, 1.0, 1e-13);
        let oracle = simpson(&inner, 0.0, 1.0, 1e-12);
        assert!((oracle - exact).abs() < 1e-10);
        let field = ExponentField::analytic("2+y", |x| 2.0 + x[1], 2.0, 3.0, 1.0, 1.0, false).unwrap();
        let got = modular(&unit(16), &rule(), |x| x[0], Exponent::Field(&field));
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn luxemburg_constant_exponent_is_lp_norm() {
        let n = luxemburg_norm(&unit(4), &rule(), |x| x[0], Exponent::Constant(2.0)).unwrap();
        assert!((n - 1.0 / 3.0f64.sqrt()).abs() < 1e-9);
        let n3 = luxemburg_norm(&unit(4), &rule(), |x| x[0], Exponent::Constant(3.0)).unwrap();
        assert!((n3 - 0.25f64.powf(1.0 / 3.0)).abs() < 1e-9);
        assert_eq!(luxemburg_norm(&unit(2), &rule(), |_| 0.0, Exponent::Constant(2.0)).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_modular_rejected() {
        let s = SampledField { weights: vec![1.0], values: vec![f64::INFINITY], exponents: vec![2.0] };
        assert_eq!(s.luxemburg(), Err(NormError::NonFinite));
    }

    #[test]
    fn eoc_examples() {
        assert_eq!(eoc(&[1.0, 0.5], &[1.0, 0.25]).unwrap(), vec![2.0]);
        assert_eq!(eoc(&[1.0, 0.5], &[1.0, 0.5]).unwrap(), vec![1.0]);
        let h = [0.125, 0.0625, 0.03125];
        let e: Vec<f64> = h.iter().map(|x: &f64| x.powf(0.885)).collect();
        for r in eoc(&h, &e).unwrap() {
            assert!((r - 0.885).abs() < 1e-12);
        }
        assert!(matches!(eoc(&[1.0, 0.5], &[1.0, 0.0]), Err(NormError::NonPositiveError(_))));
        assert!(matches!(eoc(&[0.5, 1.0], &[1.0, 0.5]), Err(NormError::MeshSizeOrder(..))));
        assert!(matches!(eoc(&[1.0], &[1.0]), Err(NormError::TooFewRecords(1))));
    }

    fn sine_setup(n: usize) -> (Arc<FeSpacePair>, ExponentField, PiecewiseExponent) {
        let s = FeSpacePair::build(Arc::new(unit(n)), PairKind::TaylorHood);
        let field = ExponentField::from_spec(&ExponentSpec::Sine2d { p_c: 2.0, delta: 0.3, frequency: 1.0 }).unwrap();
        let pw = localize(&field, s.mesh());
        (s, field, pw)
    }

    #[test]
    fn quasinorm_reduces_to_h1_seminorm_for_p2() {
        let s = FeSpacePair::build(Arc::new(unit(6)), PairKind::Mini);
        let v = |x: [f64; 2]| [x[0] * x[0] * x[1], (x[0] * x[1]).sin()];
        let dv = |x: [f64; 2]| {
            let c = (x[0] * x[1]).cos();
            SymTensor2::sym_part([[2.0 * x[0] * x[1], x[0] * x[0]], [x[1] * c, x[0] * c]])
        };
        let vh = s.interpolate_velocity(v);
        let pw = localize(&ExponentField::constant(2.0).unwrap(), s.mesh());
        let kern = NFunctionKernel::new(0.0, 1.0, 2.0).unwrap();
        let q = quasinorm_error(dv, &vh, &pw, &kern).unwrap();
        let direct = SampledField::new(s.mesh(), s.quadrature(), |k, b, x| (dv(x) - vh.evaluate(k, b).unwrap().sym_gradient).norm(), Exponent::Constant(2.0))
            .modular()
            .sqrt();
        assert!((q - direct).abs() <= 1e-12 * direct);
        assert!(q > 0.0);
    }

    #[test]
    fn quasinorm_vanishes_on_identical_fields() {
        let (s, _, pw) = sine_setup(4);
        let f = |x: [f64; 2]| [x[0] * x[1], x[0] - x[1] * x[1]];
        let vh = s.interpolate_velocity(f);
        let dv = |x: [f64; 2]| SymTensor2::sym_part([[x[1], x[0]], [1.0, -2.0 * x[1]]]);
        let kern = NFunctionKernel::new(1.0, 1.0, 2.0).unwrap();
        assert!(quasinorm_error(dv, &vh, &pw, &kern).unwrap() < 1e-12);
        assert!(matches!(quasinorm_error(dv, &s.zero_pressure(), &pw, &kern), Err(NormError::WrongField(_))));
    }

    #[test]
    fn quasinorm_symmetric_under_exchange() {
        let (s, _, pw) = sine_setup(4);
        let kern = NFunctionKernel::new(0.5, 1.0, 2.0).unwrap();
        let a = |x: [f64; 2]| [x[0] * x[0], x[0] * x[1]];
        let b = |x: [f64; 2]| [x[1] * x[1] - x[0], 3.0 * x[0] * x[1]];
        let ga = |x: [f64; 2]| SymTensor2::sym_part([[2.0 * x[0], 0.0], [x[1], x[0]]]);
        let gb = |x: [f64; 2]| SymTensor2::sym_part([[-1.0, 2.0 * x[1]], [3.0 * x[1], 3.0 * x[0]]]);
        let (ah, bh) = (s.interpolate_velocity(a), s.interpolate_velocity(b));
        // the P2 interpolants are exact, so swapping the roles must not matter
        let e1 = quasinorm_error(ga, &bh, &pw, &kern).unwrap();
        let e2 = quasinorm_error(gb, &ah, &pw, &kern).unwrap();
        assert!((e1 - e2).abs() <= 1e-12 * e1);
    }

    #[test]
    fn pressure_error_examples() {
        let (s, _, pw) = sine_setup(4);
        let q = |x: [f64; 2]| x[0] - 0.5 + 2.0 * (x[1] - 0.5);
        let qh = s.interpolate_pressure(q);
        let e = pressure_error(q, &qh, &pw).unwrap();
        assert!(e.luxemburg < 1e-12 && e.modular < 1e-12);
        // p = 2: Luxemburg norm is the L2 norm
        let two = localize(&ExponentField::constant(2.0).unwrap(), s.mesh());
        let g = |x: [f64; 2]| (3.0 * x[0]).sin() * x[1];
        let e2 = pressure_error(g, &s.zero_pressure(), &two).unwrap();
        assert!((e2.luxemburg - e2.modular.sqrt()).abs() < 1e-9 * e2.luxemburg);
    }

    #[test]
    fn pressure_modular_bounded_by_norm_powers() {
        let (s, field, pw) = sine_setup(4);
        let conj = crate::exponent::conjugate_field(&field).unwrap();
        let (a, b) = (conj.p_minus(), conj.p_plus());
        for c in [0.05, 0.4, 1.0, 3.0, 20.0] {
            let q = move |x: [f64; 2]| c * ((2.0 * x[0]).cos() - x[1] * x[1]);
            let e = pressure_error(q, &s.zero_pressure(), &pw).unwrap();
            let bound = e.luxemburg.powf(a).max(e.luxemburg.powf(b));
            assert!(e.modular <= bound * (1.0 + 1e-8), "c={c}");
        }
    }

    #[test]
    fn jensen_on_cells() {
        // phi(x, mean |f|) <= mean phi(x, |f|) with x frozen in the cell
        let (s, field, _) = sine_setup(4);
        let mesh = s.mesh();
        let r = rule();
        let f = |x: [f64; 2]| (5.0 * x[0]).sin() + x[1] * x[1] * 3.0 - 1.0;
        for k in 0..mesh.num_cells() {
            for b in [[0.2, 0.3, 0.5], [1.0 / 3.0; 3]] {
                let x0 = mesh.to_physical(k, &b);
                let kern = NFunctionKernel::new(0.3, 1.0, field.value(x0)).unwrap();
                let mut mean_abs = 0.0;
                let mut mean_phi = 0.0;
                for (pt, w) in r.points.iter().zip(&r.weights) {
                    let v = f(mesh.to_physical(k, pt)).abs();
                    mean_abs += w * v;
                    mean_phi += w * kern.phi(v).unwrap();
                }
                assert!(kern.phi(mean_abs).unwrap() <= mean_phi * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn norm_equivalence_ratio_bounded() {
        for n in [4, 8] {
            let (s, field, pw) = sine_setup(n);
            let g = s.interpolate_pressure(|x| (3.0 * x[0] + x[1]).sin() + 0.5);
            let r = norm_equivalence_ratio(&g, &field, &pw).unwrap();
            assert!(r > 0.5 && r < 2.0, "n={n}: {r}");
        }
    }

    fn sampled(vals: &[f64], exps: &[f64]) -> SampledField {
        let w = 1.0 / vals.len() as f64;
        SampledField { weights: vec![w; vals.len()], values: vals.iter().map(|v| v.abs()).collect(), exponents: exps.to_vec() }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn homogeneity(vals in prop::collection::vec(-5.0f64..5.0, 6), exps in prop::collection::vec(1.2f64..3.5, 6), c in -10.0f64..10.0) {
            prop_assume!(vals.iter().any(|v| v.abs() > 1e-3) && c.abs() > 1e-3);
            let n = sampled(&vals, &exps).luxemburg().unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
            let nc = sampled(&scaled, &exps).luxemburg().unwrap();
            prop_assert!((nc - c.abs() * n).abs() <= 1e-9 * nc);
        }

        #[test]
        fn unit_modular(vals in prop::collection::vec(-5.0f64..5.0, 6), exps in prop::collection::vec(1.2f64..3.5, 6)) {
            prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
            let s = sampled(&vals, &exps);
            let n = s.luxemburg().unwrap();
            prop_assert!((s.modular_scaled(n) - 1.0).abs() <= 1e-8);
        }

        #[test]
        fn triangle_inequality(a in prop::collection::vec(-5.0f64..5.0, 6), b in prop::collection::vec(-5.0f64..5.0, 6), exps in prop::collection::vec(1.2f64..3.5, 6)) {
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let (na, nb, ns) = (sampled(&a, &exps).luxemburg().unwrap(), sampled(&b, &exps).luxemburg().unwrap(), sampled(&sum, &exps).luxemburg().unwrap());
            prop_assert!(ns <= na + nb + 1e-9);
        }

        #[test]
        fn unit_ball(vals in prop::collection::vec(-2.0f64..2.0, 6), exps in prop::collection::vec(1.2f64..3.5, 6)) {
            let s = sampled(&vals, &exps);
            let m = s.modular();
            let n = s.luxemburg().unwrap();
            if m <= 1.0 {
                prop_assert!(n <= 1.0 + 1e-9);
            } else {
                prop_assert!(n > 1.0 - 1e-9);
            }
        }
    }
}
