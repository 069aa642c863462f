//! Numerical experiments on Feigenbaum-type polynomials `z^d + c`.
//!
//! The crate covers period-doubling parameters and the renormalization fixed
//! point, nests of puzzle disks with Monte Carlo estimates of their return
//! statistics, truncated Poincaré series and conformal measures, box-counting
//! dimension, and the real Fibonacci maps `a − |x|^ℓ`.
//!
//! Numerical kernels are generic over [`Real`]; binary64 is the default and
//! [`Extended`] (double-double) is used where orbits need more digits.

pub mod conformal;
pub mod dimension;
pub mod dynamics;
pub mod error;
pub mod fibonacci;
pub mod nest;
pub mod poincare;
pub mod regression;
pub mod renorm;
pub mod sampling;
pub mod scalar;
pub mod stats;
pub mod trichotomy;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

/// Double-double scalar, about 32 significant digits.
pub type Extended = twofloat::TwoFloat;

pub type FamilyMap64 = dynamics::FamilyMap<f64>;
pub type FamilyMapExt = dynamics::FamilyMap<Extended>;
pub type FixedPoint64 = renorm::FixedPointSolution<f64>;
pub type DomainNest64 = nest::DomainNest<f64>;
pub type RealMap64 = fibonacci::RealUnimodalMap<f64>;
pub type RealMapExt = fibonacci::RealUnimodalMap<Extended>;
pub type PrincipalNestExt = fibonacci::PrincipalNest<Extended>;
