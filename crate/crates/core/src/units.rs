//! Unit conversions shared across the crate.
//!
//! Internal convention: lengths in nm, fields in Gauss, densities in nm^-3,
//! times in microseconds, frequencies in MHz. Public interfaces take lengths
//! in micrometers and convert here.

use std::f64::consts::TAU;

/// Micrometers to nanometers.
pub const NM_PER_UM: f64 = 1.0e3;

pub fn um_to_nm(um: f64) -> f64 {
    um * NM_PER_UM
}

/// Accumulated precession phase in radians.
///
/// MHz/G times G times us is a cycle count; the factor 2*pi makes it a phase.
/// Every signal-contrast expression routes through this helper so the 2*pi
/// bookkeeping lives in exactly one place.
pub fn phase_rad(gamma_mhz_per_g: f64, field_gauss: f64, time_us: f64) -> f64 {
    TAU * gamma_mhz_per_g * field_gauss * time_us
}
