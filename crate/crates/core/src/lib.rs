//! Numerical evaluation of multipoint (space-time) distributions for TASEP
//! and the KPZ fixed point with compactly supported initial conditions.
//!
//! The library has three layers:
//!
//! * low-level machinery: spectral quadrature rules ([`quad`]), complex
//!   special functions ([`special`]), and nested integration contours with
//!   their z-dependent measure ([`contour`]);
//! * the exact formulas: random-walk characteristic functions and the
//!   finite-time TASEP series ([`tasep`]), Brownian characteristic functions
//!   and the KPZ fixed point series ([`kpz`]), and the equal-time Fredholm
//!   determinant reductions ([`equal_time`]);
//! * independent oracles used for validation: Monte Carlo and uniformization
//!   solvers for TASEP ([`tasep::sim`], [`tasep::ctmc`]), and the Airy-kernel
//!   Tracy-Widom determinant ([`equal_time::tw_gue`]).
//!
//! All computations are deterministic given their inputs (and seed, for the
//! Monte Carlo paths); parallel reductions preserve the sequential summation
//! order.

pub mod contour;
pub mod equal_time;
pub mod kpz;
pub mod quad;
pub mod series;
pub mod special;
pub mod tasep;

pub use num_complex::Complex64;

/// Shorthand used throughout: the complex unit.
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// 2 pi i, the universal contour-integral normalization.
pub(crate) fn two_pi_i() -> Complex64 {
    Complex64::new(0.0, 2.0 * std::f64::consts::PI)
}
