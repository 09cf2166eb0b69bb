//! Wrapped-phase arithmetic.
//!
//! Every wrap to `[-π, π)` in the crate goes through [`wrap`].

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `[-π, π)`, i.e. `mod{x + π, 2π} − π`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Wraps `x` into the centered interval `[-period/2, period/2)`.
#[inline]
pub fn wrap_period(x: f64, period: f64) -> f64 {
    wrap(x * TAU / period) * period / TAU
}
