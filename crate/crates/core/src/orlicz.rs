//! Power-type N-functions `phi(t) = int_0^t (kappa + s)^(p-2) s ds`, their shifts
//! and conjugates, and the tensor maps built on them.
//!
//! The exponent `p` is a per-point value: callers re-bind it with
//! [`NFunctionKernel::with_exponent`] when sweeping over quadrature points.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrliczError {
    #[error("invalid kernel parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("argument {name} = {value} is outside [0, inf)")]
    Domain { name: &'static str, value: f64 },
    #[error("stress derivative is unbounded at |eta| = {norm:e} (kappa = 0, p = {p})")]
    Singular { norm: f64, p: f64 },
    #[error("matrix is not symmetric: off-diagonal entries {0} and {1}")]
    NotSymmetric(f64, f64),
}

/// Symmetric 2x2 tensor, stored by its three independent entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymTensor2 { xx, xy, yy }
    }

    pub const fn identity() -> Self {
        SymTensor2 { xx: 1.0, xy: 0.0, yy: 1.0 }
    }

    /// Accepts a full matrix only if it is exactly symmetric.
    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self, OrliczError> {
        if m[0][1] != m[1][0] {
            return Err(OrliczError::NotSymmetric(m[0][1], m[1][0]));
        }
        Ok(SymTensor2::new(m[0][0], m[0][1], m[1][1]))
    }

    /// Symmetric part `(G + G^T) / 2` of an arbitrary matrix.
    pub fn sym_part(g: [[f64; 2]; 2]) -> Self {
        SymTensor2::new(g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1])
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    /// Frobenius product `A : B`.
    pub fn ddot(&self, other: &SymTensor2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn scale(&self, s: f64) -> Self {
        SymTensor2::new(s * self.xx, s * self.xy, s * self.yy)
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        self.scale(-1.0)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, t: SymTensor2) -> SymTensor2 {
        t.scale(self)
    }
}

/// Linear map `xi -> scale * xi + rank_one * (dir : xi) dir` on symmetric tensors.
///
/// This is the exact shape of the stress derivative, and it is self-adjoint
/// with respect to the Frobenius product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymLinearMap {
    pub scale: f64,
    pub rank_one: f64,
    pub direction: SymTensor2,
}

impl SymLinearMap {
    pub fn identity(scale: f64) -> Self {
        SymLinearMap { scale, rank_one: 0.0, direction: SymTensor2::ZERO }
    }

    pub fn apply(&self, xi: &SymTensor2) -> SymTensor2 {
        let proj = self.direction.ddot(xi);
        xi.scale(self.scale) + self.direction.scale(self.rank_one * proj)
    }

    /// `DS[xi] : zeta`.
    pub fn bilinear(&self, xi: &SymTensor2, zeta: &SymTensor2) -> f64 {
        self.scale * xi.ddot(zeta)
            + self.rank_one * self.direction.ddot(xi) * self.direction.ddot(zeta)
    }

    /// Eigenvalues restricted to the symmetric tensors, ascending.
    ///
    /// The map acts as `scale` on the orthogonal complement of `direction`
    /// and as `scale + rank_one |direction|^2` along it.
    pub fn eigenvalue_bounds(&self) -> (f64, f64) {
        let n2 = self.direction.ddot(&self.direction);
        let along = self.scale + self.rank_one * n2;
        if n2 == 0.0 {
            (self.scale, self.scale)
        } else {
            (self.scale.min(along), self.scale.max(along))
        }
    }
}

/// `phi` with regularisation `kappa`, viscosity scale `mu` and a pointwise exponent `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NFunctionKernel {
    kappa: f64,
    mu: f64,
    p: f64,
}

impl NFunctionKernel {
    pub fn new(kappa: f64, mu: f64, p: f64) -> Result<Self, OrliczError> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(OrliczError::InvalidParameter { name: "kappa", value: kappa });
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(OrliczError::InvalidParameter { name: "mu", value: mu });
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(OrliczError::InvalidParameter { name: "p", value: p });
        }
        Ok(NFunctionKernel { kappa, mu, p })
    }

    pub fn with_exponent(&self, p: f64) -> Result<Self, OrliczError> {
        NFunctionKernel::new(self.kappa, self.mu, p)
    }

    /// Rebinds `p` without validation; the caller guarantees `p > 1`.
    pub(crate) fn at_exponent(&self, p: f64) -> Self {
        debug_assert!(p > 1.0);
        NFunctionKernel { p, ..*self }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn phi(&self, t: f64) -> Result<f64, OrliczError> {
        check_nonneg("t", t)?;
        Ok(shifted_integral(self.kappa, self.p, t))
    }

    /// `phi_a(t) = int_0^t (kappa + a + tau)^(p-2) tau dtau`.
    pub fn phi_shifted(&self, a: f64, t: f64) -> Result<f64, OrliczError> {
        check_nonneg("a", a)?;
        check_nonneg("t", t)?;
        Ok(shifted_integral(self.kappa + a, self.p, t))
    }

    /// `phi_a'(t) = (kappa + a + t)^(p-2) t`.
    pub fn phi_shifted_prime(&self, a: f64, t: f64) -> Result<f64, OrliczError> {
        check_nonneg("a", a)?;
        check_nonneg("t", t)?;
        Ok(shifted_prime(self.kappa + a, self.p, t))
    }

    /// Second derivative of the unshifted function, `(kappa + t)^(p-3) (kappa + (p-1) t)`.
    pub fn phi_second(&self, t: f64) -> Result<f64, OrliczError> {
        check_nonneg("t", t)?;
        let base = self.kappa + t;
        if base == 0.0 {
            // limit of (p-1) t^(p-2) as t -> 0
            return Ok(if self.p < 2.0 {
                f64::INFINITY
            } else if self.p == 2.0 {
                1.0
            } else {
                0.0
            });
        }
        Ok(base.powf(self.p - 3.0) * (self.kappa + (self.p - 1.0) * t))
    }

    /// Complementary function `(phi_a)^*(t) = sup_s (s t - phi_a(s))`.
    pub fn conjugate(&self, a: f64, t: f64) -> Result<f64, OrliczError> {
        check_nonneg("a", a)?;
        check_nonneg("t", t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let c = self.kappa + a;
        let s = invert_prime(c, self.p, t);
        Ok((s * t - shifted_integral(c, self.p, s)).max(0.0))
    }

    /// The maximiser `s` of `s t - phi_a(s)`, i.e. the solution of `phi_a'(s) = t`.
    pub fn conjugate_argmax(&self, a: f64, t: f64) -> Result<f64, OrliczError> {
        check_nonneg("a", a)?;
        check_nonneg("t", t)?;
        Ok(invert_prime(self.kappa + a, self.p, t))
    }

    /// `S(eta) = mu (kappa + |eta|)^(p-2) eta`.
    pub fn stress(&self, eta: &SymTensor2) -> SymTensor2 {
        let n = eta.norm();
        if n == 0.0 {
            return SymTensor2::ZERO;
        }
        eta.scale(self.mu * (self.kappa + n).powf(self.p - 2.0))
    }

    /// Derivative `DS(eta)`.
    pub fn stress_jacobian(&self, eta: &SymTensor2) -> Result<SymLinearMap, OrliczError> {
        let n = eta.norm();
        let p = self.p;
        if self.kappa == 0.0 && p < 2.0 && n < 1e-14 {
            return Err(OrliczError::Singular { norm: n, p });
        }
        let base = self.kappa + n;
        if n == 0.0 {
            // kappa > 0 here unless p >= 2, where 0^(p-2) is finite
            return Ok(SymLinearMap::identity(self.mu * base.powf(p - 2.0)));
        }
        let scale = self.mu * base.powf(p - 2.0);
        let rank_one = self.mu * (p - 2.0) * base.powf(p - 3.0) / n;
        Ok(SymLinearMap { scale, rank_one, direction: *eta })
    }

    /// `F(eta) = (kappa + |eta|)^((p-2)/2) eta`.
    pub fn fmap(&self, eta: &SymTensor2) -> SymTensor2 {
        let n = eta.norm();
        if n == 0.0 {
            return SymTensor2::ZERO;
        }
        eta.scale((self.kappa + n).powf(0.5 * (self.p - 2.0)))
    }

    /// `((S(P) - S(Q)) : (P - Q), |F(P) - F(Q)|^2, phi_{|P|}(|P - Q|))`.
    pub fn hammer_triplet(&self, p_t: &SymTensor2, q_t: &SymTensor2) -> (f64, f64, f64) {
        let diff = *p_t - *q_t;
        let monotone = (self.stress(p_t) - self.stress(q_t)).ddot(&diff);
        let fdiff = self.fmap(p_t) - self.fmap(q_t);
        let shifted = shifted_integral(self.kappa + p_t.norm(), self.p, diff.norm());
        (monotone, fdiff.ddot(&fdiff), shifted)
    }
}

fn check_nonneg(name: &'static str, value: f64) -> Result<(), OrliczError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(OrliczError::Domain { name, value })
    }
}

fn shifted_prime(c: f64, p: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    (c + t).powf(p - 2.0) * t
}

/// `int_0^t (c + s)^(p-2) s ds` for `c, t >= 0`.
///
/// Closed-form antiderivative, rewritten in `u = t / c` to avoid cancellation:
/// a binomial series for small `u`, `expm1`/`ln_1p` in the middle range.
pub(crate) fn shifted_integral(c: f64, p: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return t.powf(p) / p;
    }
    let u = t / c;
    if u < 0.1 {
        // sum_k binom(p-2, k) u^(k+2) / (k+2)
        let alpha = p - 2.0;
        let mut binom = 1.0;
        let mut upow = u * u;
        let mut sum = 0.0;
        for k in 0..80 {
            let term = binom * upow / (k as f64 + 2.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            binom *= (alpha - k as f64) / (k as f64 + 1.0);
            upow *= u;
        }
        c.powf(p) * sum
    } else if u <= 1e3 {
        let l = u.ln_1p();
        let g = (p * l).exp_m1() / p - ((p - 1.0) * l).exp_m1() / (p - 1.0);
        c.powf(p) * g
    } else {
        let s = c + t;
        let at_t = s.powf(p) / p - c * s.powf(p - 1.0) / (p - 1.0);
        let at_0 = c.powf(p) / p - c.powf(p) / (p - 1.0);
        at_t - at_0
    }
}

/// Solves `(c + s)^(p-2) s = t` for `s >= 0` by safeguarded Newton iteration.
fn invert_prime(c: f64, p: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let f = |s: f64| shifted_prime(c, p, s) - t;
    let mut lo = 0.0;
    let mut hi = t.powf(1.0 / (p - 1.0)) * (1.0 + c);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // Newton from the upper end; convexity-free, so keep the bracket.
    let mut s = hi;
    for _ in 0..200 {
        let fs = f(s);
        if fs == 0.0 {
            return s;
        }
        if fs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
        let d = (c + s).powf(p - 3.0) * (c + (p - 1.0) * s);
        let newton = s - fs / d;
        s = if d.is_finite() && d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    s
}
