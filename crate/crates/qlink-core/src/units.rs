//! Frequency conventions. Internal frequencies are angular (rad/s); inputs
//! quoted "per 2π" in MHz or GHz convert here.

use core::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// f/2π in MHz → rad/s.
pub fn mhz(f_over_2pi_mhz: f64) -> f64 {
    TWO_PI * f_over_2pi_mhz * 1e6
}

/// f/2π in GHz → rad/s.
pub fn ghz(f_over_2pi_ghz: f64) -> f64 {
    TWO_PI * f_over_2pi_ghz * 1e9
}

/// rad/s → f/2π in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (TWO_PI * 1e6)
}

/// rad/s → rad/ns.
pub fn per_ns(omega: f64) -> f64 {
    omega * 1e-9
}
