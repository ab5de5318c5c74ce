//! Shared domain types: atomic-medium constants, drive fields, signal pulses,
//! spectral windows and time grids.
//!
//! All types are plain immutable values; validation happens once at
//! construction (`validate`) and operations treat them as trusted afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Atomic-ensemble constants of the four-level N-scheme.
///
/// Levels: |1⟩, |2⟩ hyperfine ground states; |3⟩ the Λ-system excited state
/// shared by probe and coupling; |4⟩ the excited state addressed by the
/// detuned signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// On-resonance optical density seen by the probe (intensity OD).
    pub d0: f64,
    /// Ground-state coherence dephasing rate, rad/s.
    pub gamma: f64,
    /// Population decay rate of |3⟩, rad/s.
    pub gamma3: f64,
    /// Population decay rate of |4⟩, rad/s.
    pub gamma4: f64,
    /// Fraction of |3⟩ decay returning to |1⟩; the remainder feeds |2⟩.
    pub branch3: f64,
}

impl MediumParams {
    /// Rb D2 defaults: natural linewidth on both excited states, even
    /// branching, and the quoted 75 kHz ground-state dephasing.
    pub fn rb_d2(d0: f64) -> Self {
        MediumParams {
            d0,
            gamma: units::to_angular(75e3),
            gamma3: units::D2_LINEWIDTH,
            gamma4: units::D2_LINEWIDTH,
            branch3: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0 >= 0.0) {
            return Err(Error::invalid("d0", format!("must be >= 0, got {}", self.d0)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid("gamma", "must be >= 0"));
        }
        if !(self.gamma3 > 0.0) {
            return Err(Error::invalid("gamma3", "must be > 0"));
        }
        if !(self.gamma4 > 0.0) {
            return Err(Error::invalid("gamma4", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.branch3) {
            return Err(Error::invalid("branch3", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// CW drive fields and detunings of the N-scheme, all angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    /// Probe Rabi frequency on |1⟩→|3⟩.
    pub omega_p: f64,
    /// Coupling Rabi frequency on |2⟩→|3⟩.
    pub omega_c: f64,
    /// Probe one-photon detuning.
    pub delta_p: f64,
    /// Two-photon detuning (probe minus coupling detuning).
    pub delta_2ph: f64,
    /// Signal carrier detuning from |2⟩→|4⟩.
    pub delta_s: f64,
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_p >= 0.0) {
            return Err(Error::invalid("omega_p", "must be >= 0"));
        }
        if !(self.omega_c >= 0.0) {
            return Err(Error::invalid("omega_c", "must be >= 0"));
        }
        Ok(())
    }

    /// True when the probe is weak enough for the linear-response treatment
    /// of the EIT line (probe Rabi below a fifth of the coupling Rabi).
    pub fn is_weak_probe(&self) -> bool {
        self.omega_p < self.omega_c / 5.0
    }
}

/// A Gaussian signal pulse; `tau_s` is the RMS duration of the *intensity*
/// envelope and `n_ph` the photon number it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalPulse {
    /// RMS duration of the intensity envelope, s.
    pub tau_s: f64,
    /// Photon number.
    pub n_ph: f64,
    /// Arrival time of the envelope peak, s.
    pub t0: f64,
    /// Peak power, W; optional, must be consistent with `n_ph` when set.
    pub peak_power: Option<f64>,
    /// Carrier wavelength, m.
    pub wavelength: f64,
}

impl SignalPulse {
    /// Pulse defined by photon number alone.
    pub fn from_photons(tau_s: f64, n_ph: f64, t0: f64) -> Self {
        SignalPulse {
            tau_s,
            n_ph,
            t0,
            peak_power: None,
            wavelength: units::D2_WAVELENGTH,
        }
    }

    /// Pulse defined by peak power; the photon number follows from the
    /// Gaussian pulse energy P_peak·√(2π)·τ_s.
    pub fn from_peak_power(tau_s: f64, peak_power: f64, t0: f64, wavelength: f64) -> Result<Self> {
        if !(peak_power >= 0.0) {
            return Err(Error::invalid("peak_power", "must be >= 0"));
        }
        let energy = peak_power * (std::f64::consts::TAU).sqrt() * tau_s;
        let n_ph = units::photon_number(energy, wavelength)?;
        let pulse = SignalPulse {
            tau_s,
            n_ph,
            t0,
            peak_power: Some(peak_power),
            wavelength,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    /// Total pulse energy, J.
    pub fn energy(&self) -> f64 {
        self.n_ph * units::PLANCK * units::SPEED_OF_LIGHT / self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s > 0.0) {
            return Err(Error::invalid("tau_s", "must be > 0"));
        }
        if !(self.n_ph >= 0.0) {
            return Err(Error::invalid("n_ph", "must be >= 0"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be > 0"));
        }
        if let Some(p) = self.peak_power {
            let energy_from_power = p * (std::f64::consts::TAU).sqrt() * self.tau_s;
            let energy = self.energy();
            let scale = energy.abs().max(energy_from_power.abs());
            if scale > 0.0 && (energy - energy_from_power).abs() > 1e-6 * scale {
                return Err(Error::invalid(
                    "peak_power",
                    format!(
                        "inconsistent with photon number: {energy_from_power:e} J vs {energy:e} J"
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Instantaneous photon flux of a Gaussian pulse, photons/s.
///
/// Normalised so the time integral equals the photon number.
pub fn gaussian_flux(t: f64, pulse: &SignalPulse) -> f64 {
    let u = (t - pulse.t0) / pulse.tau_s;
    pulse.n_ph / ((std::f64::consts::TAU).sqrt() * pulse.tau_s) * (-0.5 * u * u).exp()
}

/// EIT transparency window, stored as the FWHM in angular frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    /// Transparency-window FWHM, rad/s.
    pub delta_eit: f64,
}

impl SpectralWindow {
    pub fn new(delta_eit: f64) -> Result<Self> {
        if !(delta_eit > 0.0) {
            return Err(Error::invalid("delta_eit", "must be > 0"));
        }
        Ok(SpectralWindow { delta_eit })
    }

    /// Window specified as an FWHM in ordinary Hz.
    pub fn from_fwhm_hz(f_hz: f64) -> Result<Self> {
        SpectralWindow::new(units::to_angular(f_hz))
    }

    pub fn fwhm_hz(&self) -> f64 {
        units::to_ordinary(self.delta_eit)
    }
}

/// Uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_samples: usize) -> Result<Self> {
        let grid = TimeGrid {
            t_start,
            dt,
            n_samples,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid spanning `[t_start, t_end]` with spacing at most `dt_max`.
    pub fn spanning(t_start: f64, t_end: f64, dt_max: f64) -> Result<Self> {
        if !(t_end > t_start) || !(dt_max > 0.0) {
            return Err(Error::Grid(format!(
                "cannot span [{t_start:e}, {t_end:e}] with dt {dt_max:e}"
            )));
        }
        let n = ((t_end - t_start) / dt_max).ceil() as usize + 1;
        TimeGrid::new(t_start, (t_end - t_start) / (n - 1) as f64, n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if self.n_samples < 2 {
            return Err(Error::invalid("n_samples", "must be >= 2"));
        }
        Ok(())
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + self.dt * k as f64
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_samples - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(|k| self.time(k))
    }
}
