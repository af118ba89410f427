//! Physical constants (CODATA 2018, exact where defined).

use std::f64::consts::TAU;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Converts a frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn to_hz(w: f64) -> f64 {
    w / TAU
}
