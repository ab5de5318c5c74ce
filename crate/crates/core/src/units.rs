//! Unit bridges and photon bookkeeping.
//!
//! Everything downstream works in angular frequencies (rad/s); quoted
//! laboratory values (kHz/MHz linewidths, window FWHMs) convert through
//! [`to_angular`].

use crate::error::{Error, Result};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Rb D2 line wavelength, m; the probe/signal carrier for the level scheme
/// simulated here.
pub const D2_WAVELENGTH: f64 = 780.24e-9;

/// Rb D2 natural linewidth as an angular frequency, rad/s (2π × 6.07 MHz).
pub const D2_LINEWIDTH: f64 = std::f64::consts::TAU * 6.07e6;

/// Convert an ordinary frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn to_angular(f_hz: f64) -> f64 {
    std::f64::consts::TAU * f_hz
}

/// Convert an angular frequency in rad/s back to Hz.
#[inline]
pub fn to_ordinary(omega: f64) -> f64 {
    omega / std::f64::consts::TAU
}

/// Number of photons carried by `energy` joules of light at `wavelength`.
pub fn photon_number(energy: f64, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::invalid(
            "wavelength",
            format!("must be > 0, got {wavelength:e}"),
        ));
    }
    if energy < 0.0 {
        return Err(Error::invalid(
            "energy",
            format!("must be >= 0, got {energy:e}"),
        ));
    }
    Ok(energy * wavelength / (PLANCK * SPEED_OF_LIGHT))
}

/// Spectral bandwidth (Hz) associated with a Gaussian pulse of RMS intensity
/// duration `tau_s`.
///
/// The 1/(4π·τ_s) convention matches the quoted 2 MHz marker for a 40 ns
/// (RMS) pulse.
pub fn signal_bandwidth(tau_s: f64) -> Result<f64> {
    if !(tau_s > 0.0) {
        return Err(Error::invalid(
            "tau_s",
            format!("must be > 0, got {tau_s:e}"),
        ));
    }
    Ok(1.0 / (4.0 * std::f64::consts::PI * tau_s))
}
