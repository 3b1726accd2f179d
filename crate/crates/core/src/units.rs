//! Frequency unit conventions.
//!
//! Internally every frequency is an angular frequency in rad/ns and every
//! time is in ns. Ordinary frequencies quoted in MHz or GHz are converted at
//! the boundaries with the helpers below.

use std::f64::consts::TAU;

/// Ordinary frequency in GHz to angular frequency in rad/ns.
pub fn ghz_to_rad_per_ns(f_ghz: f64) -> f64 {
    TAU * f_ghz
}

/// Ordinary frequency in MHz to angular frequency in rad/ns.
pub fn mhz_to_rad_per_ns(f_mhz: f64) -> f64 {
    TAU * f_mhz * 1e-3
}

pub fn rad_per_ns_to_ghz(omega: f64) -> f64 {
    omega / TAU
}

pub fn rad_per_ns_to_mhz(omega: f64) -> f64 {
    omega / TAU * 1e3
}

/// Power gain in dB to linear amplitude gain.
pub fn db_to_amplitude_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
