//! Mixed finite elements for the steady variable-exponent p(x)-Stokes system
//! `-div S(x, Dv) + grad q = f`, `div v = 0`, with
//! `S(x, eta) = mu (kappa + |eta|)^(p(x)-2) eta`, plus the tooling to measure
//! convergence rates against manufactured solutions.

pub mod calibration;
pub mod experiment;
pub mod exponent;
pub mod femspace;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod orlicz;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod verification;
