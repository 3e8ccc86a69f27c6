//! Sampled equivalence constants for the N-function kernel.
//!
//! The bands in [`FROZEN`] come from `examples/calibrate.rs` (10^6 samples per
//! cell, seed 20240611) widened by 5% on each side.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::orlicz::{NFunctionKernel, SymTensor2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub const EMPTY: Band = Band { lo: f64::INFINITY, hi: f64::NEG_INFINITY };

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn include(&mut self, v: f64) {
        if v.is_finite() {
            self.lo = self.lo.min(v);
            self.hi = self.hi.max(v);
        }
    }

    pub fn widened(&self, frac: f64) -> Band {
        Band { lo: self.lo / (1.0 + frac), hi: self.hi * (1.0 + frac) }
    }
}

/// Ranges of the sampled ratios for one `(kappa, p-range)` cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub kappa: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    /// `(S(P) - S(Q)) : (P - Q) / |F(P) - F(Q)|^2`.
    pub monotone_over_fmap: Band,
    /// `(S(P) - S(Q)) : (P - Q) / phi_{|P|}(|P - Q|)`.
    pub monotone_over_shifted: Band,
    /// `|F(P) - F(Q)|^2 / phi_{|P|}(|P - Q|)`.
    pub fmap_over_shifted: Band,
    /// `phi_a(t) / (phi''(a) t^2)` for `t <= a`.
    pub shift_small: Band,
    /// `phi_a(t) / phi(t)` for `t >= a`.
    pub shift_large: Band,
    /// `phi_a(lambda t) / (max(lambda^p, lambda^2) phi_a(t))`.
    pub scaling: Band,
}

impl CalibrationCell {
    fn empty(kappa: f64, p_lo: f64, p_hi: f64) -> Self {
        CalibrationCell {
            kappa,
            p_lo,
            p_hi,
            monotone_over_fmap: Band::EMPTY,
            monotone_over_shifted: Band::EMPTY,
            fmap_over_shifted: Band::EMPTY,
            shift_small: Band::EMPTY,
            shift_large: Band::EMPTY,
            scaling: Band::EMPTY,
        }
    }

    pub fn widened(&self, frac: f64) -> Self {
        CalibrationCell {
            monotone_over_fmap: self.monotone_over_fmap.widened(frac),
            monotone_over_shifted: self.monotone_over_shifted.widened(frac),
            fmap_over_shifted: self.fmap_over_shifted.widened(frac),
            shift_small: self.shift_small.widened(frac),
            shift_large: self.shift_large.widened(frac),
            scaling: self.scaling.widened(frac),
            ..*self
        }
    }

    /// Every band of `self` lies inside the matching band of `outer`.
    pub fn within(&self, outer: &CalibrationCell) -> bool {
        let inside = |a: &Band, b: &Band| a.lo >= b.lo && a.hi <= b.hi;
        inside(&self.monotone_over_fmap, &outer.monotone_over_fmap)
            && inside(&self.monotone_over_shifted, &outer.monotone_over_shifted)
            && inside(&self.fmap_over_shifted, &outer.fmap_over_shifted)
            && inside(&self.shift_small, &outer.shift_small)
            && inside(&self.shift_large, &outer.shift_large)
            && inside(&self.scaling, &outer.scaling)
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random symmetric tensor with log-uniform norm in `[1e-3, 1e3]`.
pub fn random_tensor<R: Rng>(rng: &mut R) -> SymTensor2 {
    let t = SymTensor2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let n = t.norm();
    if n == 0.0 {
        return SymTensor2::identity().scale(1e-3);
    }
    t.scale(log_uniform(rng, 1e-3, 1e3) / n)
}

/// Extremes of all ratios over `samples` random draws with `mu = 1`.
pub fn measure(kappa: f64, p_lo: f64, p_hi: f64, samples: usize, seed: u64) -> CalibrationCell {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cell = CalibrationCell::empty(kappa, p_lo, p_hi);
    for _ in 0..samples {
        let p = rng.gen_range(p_lo..=p_hi);
        let k = NFunctionKernel::new(kappa, 1.0, p).expect("valid kernel");
        let (pt, qt) = (random_tensor(&mut rng), random_tensor(&mut rng));
        let (m, f, s) = k.hammer_triplet(&pt, &qt);
        if f > 0.0 && s > 0.0 {
            cell.monotone_over_fmap.include(m / f);
            cell.monotone_over_shifted.include(m / s);
            cell.fmap_over_shifted.include(f / s);
        }
        let a = log_uniform(&mut rng, 1e-3, 1e3);
        let t = log_uniform(&mut rng, 1e-3, 1e3);
        let phi_a = k.phi_shifted(a, t).expect("nonnegative");
        if t <= a {
            cell.shift_small.include(phi_a / (k.phi_second(a).expect("nonnegative") * t * t));
        } else {
            cell.shift_large.include(phi_a / k.phi(t).expect("nonnegative"));
        }
        let lambda = log_uniform(&mut rng, 1e-3, 1e3);
        let lhs = k.phi_shifted(a, lambda * t).expect("nonnegative");
        cell.scaling.include(lhs / (lambda.powf(p).max(lambda * lambda) * phi_a));
    }
    cell
}

/// Calibration cells: `kappa` in {0, 1} times `p` in [1.5, 2] and [2, 3].
pub const CELLS: [(f64, f64, f64); 4] = [(0.0, 1.5, 2.0), (0.0, 2.0, 3.0), (1.0, 1.5, 2.0), (1.0, 2.0, 3.0)];

pub const CALIBRATION_SEED: u64 = 20240611;
pub const CALIBRATION_SAMPLES: usize = 1_000_000;
pub const WIDENING: f64 = 0.05;

const fn band(lo: f64, hi: f64) -> Band {
    Band { lo, hi }
}

/// Frozen bands, one per entry of [`CELLS`].
pub const FROZEN: [CalibrationCell; 4] = [
    CalibrationCell {
        kappa: 0.0,
        p_lo: 1.5,
        p_hi: 2.0,
        monotone_over_fmap: band(8.521518346702839e-1, 1.1034780332777019e0),
        monotone_over_shifted: band(1.011554240882287e0, 3.3602162881456255e0),
        fmap_over_shifted: band(1.1271803901339463e0, 3.312500554139251e0),
        shift_small: band(4.7619125666533646e-1, 1.0499728913233635e0),
        shift_large: band(5.59680501061535e-1, 1.0499999999982308e0),
        scaling: band(3.0267609872927037e-2, 1.0499999999922467e0),
    },
    CalibrationCell {
        kappa: 0.0,
        p_lo: 2.0,
        p_hi: 3.0,
        monotone_over_fmap: band(8.500915986219447e-1, 1.1038667392716186e0),
        monotone_over_shifted: band(7.854304457505216e-1, 3.8084057791236585e0),
        fmap_over_shifted: band(7.760984977653597e-1, 4.2459467566662505e0),
        shift_small: band(2.3809963132323467e-1, 5.249985506468445e-1),
        shift_large: band(9.523809524609954e-1, 2.617989133783419e0),
        scaling: band(1.0339309886622646e-3, 1.0499999999413796e0),
    },
    CalibrationCell {
        kappa: 1.0,
        p_lo: 1.5,
        p_hi: 2.0,
        monotone_over_fmap: band(8.58899925209992e-1, 1.1020632020720207e0),
        monotone_over_shifted: band(1.0700639949427313e0, 3.346808527677582e0),
        fmap_over_shifted: band(1.1730822713734785e0, 3.3095853213481985e0),
        shift_small: band(4.7619047873090603e-1, 1.0486723812911438e0),
        shift_large: band(5.609600304256277e-1, 1.0499999998606466e0),
        scaling: band(3.046169793484721e-2, 1.0499999999677987e0),
    },
    CalibrationCell {
        kappa: 1.0,
        p_lo: 2.0,
        p_hi: 3.0,
        monotone_over_fmap: band(8.515980116395743e-1, 1.1024925265770933e0),
        monotone_over_shifted: band(7.915744027324058e-1, 3.8571466677802966e0),
        fmap_over_shifted: band(7.798127795478138e-1, 4.313623290243609e0),
        shift_small: band(2.3826374539347445e-1, 5.24999992007604e-1),
        shift_large: band(9.523809523933018e-1, 2.6113861652386436e0),
        scaling: band(1.0052675094269384e-3, 1.0499999999796958e0),
    },
];

/// Frozen cell for a `(kappa, p)` pair, if one covers it.
pub fn frozen_cell(kappa: f64, p: f64) -> Option<&'static CalibrationCell> {
    FROZEN.iter().find(|c| c.kappa == kappa && p >= c.p_lo && p <= c.p_hi)
}

/// Rust source for the frozen table.
pub fn render(cells: &[CalibrationCell]) -> String {
    let b = |x: &Band| format!("band({:e}, {:e})", x.lo, x.hi);
    let mut s = String::from("pub const FROZEN: [CalibrationCell; 4] = [\n");
    for c in cells {
        s += &format!(
            "    CalibrationCell {{\n        kappa: {:?},\n        p_lo: {:?},\n        p_hi: {:?},\n        monotone_over_fmap: {},\n        monotone_over_shifted: {},\n        fmap_over_shifted: {},\n        shift_small: {},\n        shift_large: {},\n        scaling: {},\n    }},\n",
            c.kappa,
            c.p_lo,
            c.p_hi,
            b(&c.monotone_over_fmap),
            b(&c.monotone_over_shifted),
            b(&c.fmap_over_shifted),
            b(&c.shift_small),
            b(&c.shift_large),
            b(&c.scaling)
        );
    }
    s + "];\n"
}
