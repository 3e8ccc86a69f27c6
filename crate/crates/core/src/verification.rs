//! Randomized property suites: Orlicz kernel, interpolation assumptions,
//! discrete inf-sup and norm equivalence on finite-element spaces.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{self, CalibrationCell, CELLS, FROZEN};
use crate::exponent::{localize, ExponentError, ExponentField};
use crate::femspace::{FeSpacePair, PairKind};
use crate::mesh::Triangulation;
use crate::norms::{norm_equivalence_ratio, NormError};
use crate::orlicz::{NFunctionKernel, OrliczError, SymTensor2};
use crate::projection::{fine_rule, infsup_report, korn_ratio, verify_assumptions, AssumptionReport, InfSupReport, ProjectionError, TrigField};

#[derive(Debug, thiserror::Error)]
pub enum VerificationError {
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn random_kernel<R: Rng>(rng: &mut R) -> NFunctionKernel {
    NFunctionKernel::new(rng.gen_range(0.0..=1.0), 1.0, rng.gen_range(1.5..=3.0)).expect("valid kernel")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountCheck {
    pub passed: usize,
    pub total: usize,
}

impl CountCheck {
    pub fn all(&self) -> bool {
        self.passed == self.total
    }
}

/// `s t <= phi_a(s) + phi_a^*(t)` on random `(kappa, p, a, s, t)`.
pub fn young_suite(samples: usize, seed: u64) -> Result<CountCheck, OrliczError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = 0;
    for _ in 0..samples {
        let k = random_kernel(&mut rng);
        let a = log_uniform(&mut rng, 1e-3, 1e2);
        let s = log_uniform(&mut rng, 1e-3, 1e2);
        let t = log_uniform(&mut rng, 1e-3, 1e2);
        if s * t <= k.phi_shifted(a, s)? + k.conjugate(a, t)? {
            passed += 1;
        }
    }
    Ok(CountCheck { passed, total: samples })
}

/// `sup_s (s t - phi_a^*(s))` by bisection on the derivative.
fn biconjugate(k: &NFunctionKernel, a: f64, t: f64) -> Result<f64, OrliczError> {
    if t == 0.0 {
        return Ok(0.0);
    }
    // (phi_a^*)'(s) = conjugate_argmax(a, s) is increasing in s
    let (mut lo, mut hi) = (0.0, 1.0);
    while k.conjugate_argmax(a, hi)? < t {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if k.conjugate_argmax(a, mid)? < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(s * t - k.conjugate(a, s)?)
}

/// Worst `|phi_a^**(t) - phi_a(t)| / (1 + phi_a(t))`.
pub fn biconjugation_suite(samples: usize, seed: u64) -> Result<f64, OrliczError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let k = random_kernel(&mut rng);
        let a = log_uniform(&mut rng, 1e-3, 1e1);
        let t = log_uniform(&mut rng, 1e-3, 1e1);
        let phi = k.phi_shifted(a, t)?;
        worst = worst.max((biconjugate(&k, a, t)? - phi).abs() / (1.0 + phi));
    }
    Ok(worst)
}

fn random_direction<R: Rng>(rng: &mut R) -> SymTensor2 {
    loop {
        let t = SymTensor2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = t.norm();
        if n > 1e-3 {
            return t.scale(1.0 / n);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianCheck {
    pub max_relative_error: f64,
    pub max_asymmetry: f64,
    pub min_eigenvalue: f64,
}

/// Central differences with `eps = 1e-6` against `stress_jacobian`, plus
/// symmetry and definiteness of the map on random directions.
pub fn jacobian_suite(samples: usize, seed: u64) -> Result<JacobianCheck, OrliczError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = 1e-6;
    let mut out = JacobianCheck { max_relative_error: 0.0, max_asymmetry: 0.0, min_eigenvalue: f64::INFINITY };
    for _ in 0..samples {
        let k = random_kernel(&mut rng);
        let eta = random_direction(&mut rng).scale(log_uniform(&mut rng, 1e-2, 1e2));
        let (xi, zeta) = (random_direction(&mut rng), random_direction(&mut rng));
        let ds = k.stress_jacobian(&eta)?;
        let exact = ds.apply(&xi);
        let fd = (k.stress(&(eta + xi.scale(eps))) - k.stress(&(eta - xi.scale(eps)))).scale(0.5 / eps);
        out.max_relative_error = out.max_relative_error.max((exact - fd).norm() / exact.norm());
        let (b1, b2) = (ds.bilinear(&xi, &zeta), ds.bilinear(&zeta, &xi));
        out.max_asymmetry = out.max_asymmetry.max((b1 - b2).abs() / (1.0 + b1.abs()));
        out.min_eigenvalue = out.min_eigenvalue.min(ds.eigenvalue_bounds().0);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HammerCheck {
    pub measured: Vec<CalibrationCell>,
    pub within_frozen: bool,
    pub min_monotone: f64,
}

/// Fresh hammer-triplet samples in every calibration cell against [`FROZEN`].
pub fn hammer_suite(samples: usize, seed: u64) -> HammerCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_monotone = f64::INFINITY;
    for _ in 0..samples {
        let k = random_kernel(&mut rng);
        let (m, _, _) = k.hammer_triplet(&calibration::random_tensor(&mut rng), &calibration::random_tensor(&mut rng));
        min_monotone = min_monotone.min(m);
    }
    let measured: Vec<CalibrationCell> =
        CELLS.iter().enumerate().map(|(i, &(kappa, lo, hi))| calibration::measure(kappa, lo, hi, samples, seed.wrapping_add(1 + i as u64))).collect();
    let within_frozen = measured.iter().zip(&FROZEN).all(|(m, f)| m.within(f));
    HammerCheck { measured, within_frozen, min_monotone }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrliczSuite {
    pub young: CountCheck,
    pub biconjugation_max: f64,
    pub jacobian: JacobianCheck,
    pub hammer: HammerCheck,
}

impl OrliczSuite {
    pub fn pass(&self) -> bool {
        self.young.all()
            && self.biconjugation_max <= 1e-8
            && self.jacobian.max_relative_error <= 1e-5
            && self.jacobian.max_asymmetry <= 1e-12
            && self.jacobian.min_eigenvalue >= 0.0
            && self.hammer.within_frozen
            && self.hammer.min_monotone >= 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSizes {
    pub young: usize,
    pub biconjugation: usize,
    pub jacobian: usize,
    pub hammer: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        SuiteSizes { young: 100_000, biconjugation: 10_000, jacobian: 10_000, hammer: 100_000 }
    }
}

pub fn orlicz_suite(sizes: &SuiteSizes, seed: u64) -> Result<OrliczSuite, OrliczError> {
    Ok(OrliczSuite {
        young: young_suite(sizes.young, seed)?,
        biconjugation_max: biconjugation_suite(sizes.biconjugation, seed.wrapping_add(1))?,
        jacobian: jacobian_suite(sizes.jacobian, seed.wrapping_add(2))?,
        hammer: hammer_suite(sizes.hammer, seed.wrapping_add(3)),
    })
}

/// Largest relative spread `(max - min) / max` of a positive sequence.
pub fn relative_spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi
}

/// Ratio `first / last` of a sequence.
pub fn decay_factor(v: &[f64]) -> f64 {
    v[0] / v[v.len() - 1]
}

fn unit_space(n: usize, kind: PairKind) -> Arc<FeSpacePair> {
    FeSpacePair::build(Arc::new(Triangulation::unit_square(n)), kind)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionLevel {
    pub n: usize,
    pub report: AssumptionReport,
}

pub fn assumption_scan(levels: &[usize], samples: usize, seed: u64) -> Result<Vec<AssumptionLevel>, ProjectionError> {
    levels
        .iter()
        .map(|&n| Ok(AssumptionLevel { n, report: verify_assumptions(&unit_space(n, PairKind::Mini), samples, seed)? }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSupScan {
    pub pair: PairKind,
    pub levels: Vec<InfSupReport>,
}

impl InfSupScan {
    pub fn betas(&self) -> Vec<f64> {
        self.levels.iter().map(|r| r.beta).collect()
    }

    pub fn reduced_betas(&self) -> Vec<f64> {
        self.levels.iter().map(|r| r.reduced_beta).collect()
    }
}

pub fn infsup_scan(kind: PairKind, levels: &[usize]) -> Result<InfSupScan, ProjectionError> {
    let levels = levels.iter().map(|&n| infsup_report(&unit_space(n, kind), n)).collect::<Result<_, _>>()?;
    Ok(InfSupScan { pair: kind, levels })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceBand {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Band of `||g||_{p(.)} / ||g||_{p_T(.)}` over random pressure-space
/// functions with log-uniform amplitudes in `[1e-3, 1e3]`.
pub fn equivalence_bands(field: &ExponentField, levels: &[usize], samples: usize, seed: u64) -> Result<Vec<EquivalenceBand>, VerificationError> {
    let mut out = Vec::new();
    for &n in levels {
        let space = unit_space(n, PairKind::Mini);
        let local = localize(field, space.mesh());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut band = EquivalenceBand { n, lo: f64::INFINITY, hi: f64::NEG_INFINITY };
        for _ in 0..samples {
            let amp = log_uniform(&mut rng, 1e-3, 1e3);
            let mut g = space.zero_pressure();
            for c in &mut g.coeffs {
                *c = amp * rng.gen_range(-1.0..1.0);
            }
            let r = norm_equivalence_ratio(&g, field, &local)?;
            band.lo = band.lo.min(r);
            band.hi = band.hi.max(r);
        }
        out.push(band);
    }
    Ok(out)
}

/// Each band edge stays within `tol` of its mean over the levels.
pub fn bands_stable(bands: &[EquivalenceBand], tol: f64) -> bool {
    let within = |v: Vec<f64>| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().all(|x| (x - mean).abs() <= tol * mean)
    };
    within(bands.iter().map(|b| b.lo).collect()) && within(bands.iter().map(|b| b.hi).collect())
}

/// Worst patch Korn ratio over random smooth fields and every cell.
pub fn korn_constant(n: usize, samples: usize, seed: u64) -> f64 {
    use rayon::prelude::*;
    let mesh = Triangulation::unit_square(n);
    let rule = fine_rule();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<TrigField> = (0..samples).map(|_| TrigField::random(&mut rng, 3, 2, false)).collect();
    fields
        .par_iter()
        .map(|w| (0..mesh.num_cells()).map(|k| korn_ratio(w, &mesh, k, &rule)).fold(0.0, f64::max))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentSpec;
    use crate::projection::KORN_CONSTANT;

    #[test]
    fn small_orlicz_suite_passes() {
        let sizes = SuiteSizes { young: 2000, biconjugation: 200, jacobian: 500, hammer: 2000 };
        let s = orlicz_suite(&sizes, 5).unwrap();
        assert!(s.pass(), "{s:?}");
    }

    #[test]
    fn biconjugate_of_quadratic() {
        let k = NFunctionKernel::new(0.0, 1.0, 2.0).unwrap();
        assert!((biconjugate(&k, 0.0, 3.0).unwrap() - 4.5).abs() < 1e-10);
    }

    #[test]
    fn korn_ratio_below_frozen_constant() {
        let c = korn_constant(4, 10, 11);
        assert!(c > 0.0 && c <= KORN_CONSTANT, "{c}");
    }

    #[test]
    fn spread_and_decay() {
        assert!((relative_spread(&[1.0, 0.8, 0.9]) - 0.2).abs() < 1e-15);
        assert_eq!(decay_factor(&[4.0, 2.0, 1.0]), 4.0);
    }

    #[test]
    fn equivalence_band_is_one_for_constant_exponent() {
        let field = ExponentField::from_spec(&ExponentSpec::Constant { p: 2.5 }).unwrap();
        let b = equivalence_bands(&field, &[2], 5, 1).unwrap();
        assert!((b[0].lo - 1.0).abs() < 1e-9 && (b[0].hi - 1.0).abs() < 1e-9, "{b:?}");
        assert!(bands_stable(&b, 0.0));
    }
}
