//! First-principles four-level master-equation engine.
//!
//! The N-scheme couples probe (|1⟩→|3⟩), coupling (|2⟩→|3⟩) and a detuned
//! signal (|2⟩→|4⟩) in a triple rotating frame; the signal pulse enters as a
//! time-dependent Rabi amplitude whose AC Stark shift on |2⟩ is emergent, not
//! inserted by hand. Probe phase and transmission follow from the |3⟩⟨1|
//! coherence through a thin-medium conversion calibrated so the bare
//! two-level configuration reproduces `T = e^{-d0}` exactly. Propagation
//! effects are exposed by stacking thin slabs, each driven by the complex
//! probe/coupling envelopes the previous slab emits.
//!
//! Sign convention: the reported phase is the accumulated field phase of the
//! probe envelope; a blue-detuned signal produces a positive excursion.

mod integrator;
mod liouvillian;
mod matrix;

pub use integrator::LOCAL_TOL;
pub use liouvillian::RabiAmplitudes;
pub use matrix::{DensityMatrix4, InvariantReport};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::PhaseTrace;
use crate::types::{FieldParams, MediumParams, SignalPulse, TimeGrid};

/// Signal pulse in Rabi-frequency terms: amplitude envelope
/// `Ω_s(t) = Ω_peak·exp(−(t−t0)²/(4τ_s²))`, whose intensity envelope has RMS
/// duration `τ_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsedDrive {
    /// Peak signal Rabi frequency, rad/s.
    pub omega_s_peak: f64,
    /// RMS duration of the intensity envelope, s.
    pub tau_s: f64,
    /// Arrival time of the envelope peak, s.
    pub t0: f64,
}

impl PulsedDrive {
    pub fn new(omega_s_peak: f64, tau_s: f64, t0: f64) -> Result<Self> {
        if !(omega_s_peak >= 0.0) {
            return Err(Error::invalid("omega_s_peak", "must be >= 0"));
        }
        if !(tau_s > 0.0) {
            return Err(Error::invalid("tau_s", "must be > 0"));
        }
        Ok(PulsedDrive {
            omega_s_peak,
            tau_s,
            t0,
        })
    }

    /// Rabi-domain drive for a photon-counted pulse, using the documented
    /// power-to-Rabi conversion constant (rad/s per √W).
    pub fn from_pulse(pulse: &SignalPulse, rabi_per_sqrt_watt: f64) -> Result<Self> {
        pulse.validate()?;
        let power = pulse.peak_power.ok_or_else(|| {
            Error::invalid("peak_power", "required to derive the signal Rabi frequency")
        })?;
        PulsedDrive::new(rabi_per_sqrt_watt * power.sqrt(), pulse.tau_s, pulse.t0)
    }

    #[inline]
    pub fn amplitude(&self, t: f64) -> f64 {
        let u = (t - self.t0) / (2.0 * self.tau_s);
        self.omega_s_peak * (-u * u).exp()
    }

    /// Drive with the signal switched off.
    pub fn off() -> Self {
        PulsedDrive {
            omega_s_peak: 0.0,
            tau_s: 1.0,
            t0: 0.0,
        }
    }
}

/// Probe-coherence time series produced by [`evolve`].
#[derive(Debug, Clone)]
pub struct CoherenceTrace {
    pub grid: TimeGrid,
    /// ρ₃₁(t), the probe-transition coherence.
    pub rho31: Vec<C64>,
    /// ρ₂₁(t), the ground-state coherence.
    pub rho21: Vec<C64>,
    /// ρ₃₂(t), the coupling-transition coherence.
    pub rho32: Vec<C64>,
    /// Worst-case invariant deviations across all accepted steps.
    pub report: InvariantReport,
}

/// Conversion factor from the drive-normalised coherence to probe phase and
/// log-transmission; calibrated so the bare two-level on-resonance medium
/// attenuates intensity by exactly `e^{-d0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinMediumCalibration {
    pub scale: f64,
}

/// Probe observables derived from a coherence trace.
#[derive(Debug, Clone)]
pub struct ProbeResponse {
    pub phase: PhaseTrace,
    pub transmission: Vec<f64>,
}

/// Steady state under CW probe, coupling and an optional CW signal.
pub fn steady_state(
    medium: &MediumParams,
    fields: &FieldParams,
    omega_s_cw: f64,
) -> Result<DensityMatrix4> {
    let rabi = RabiAmplitudes {
        omega_p: C64::new(fields.omega_p, 0.0),
        omega_c: C64::new(fields.omega_c, 0.0),
        omega_s: C64::new(omega_s_cw, 0.0),
    };
    liouvillian::steady_state_for(medium, fields, &rabi)
}

fn check_grid_resolution(
    medium: &MediumParams,
    fields: &FieldParams,
    omega_c_scale: f64,
    signal_active: bool,
    grid: TimeGrid,
) -> Result<()> {
    let mut fastest = medium.gamma3.max(medium.gamma4).max(omega_c_scale);
    if signal_active {
        fastest = fastest.max(fields.delta_s.abs());
    }
    let dt_max = 0.05 / fastest;
    if grid.dt > dt_max * (1.0 + 1e-9) {
        return Err(Error::Grid(format!(
            "output grid does not resolve the fastest rate: dt = {:.3e} s, need <= {:.3e} s",
            grid.dt, dt_max
        )));
    }
    Ok(())
}

/// Integrate the master equation under a pulsed signal with CW probe and
/// coupling, returning the probe and ground coherences on `grid`.
///
/// The grid must resolve the fastest rate present (decay rates, coupling
/// Rabi, and the signal detuning while the signal is on): `dt ≤ 0.05/max`.
pub fn evolve(
    medium: &MediumParams,
    fields: &FieldParams,
    drive: &PulsedDrive,
    grid: TimeGrid,
    initial: &DensityMatrix4,
) -> Result<CoherenceTrace> {
    medium.validate()?;
    fields.validate()?;
    check_grid_resolution(medium, fields, fields.omega_c, drive.omega_s_peak > 0.0, grid)?;

    let omega_p = C64::new(fields.omega_p, 0.0);
    let omega_c = C64::new(fields.omega_c, 0.0);
    let drive_fn = |t: f64| RabiAmplitudes {
        omega_p,
        omega_c,
        omega_s: C64::new(drive.amplitude(t), 0.0),
    };

    let mut rho31 = vec![C64::new(0.0, 0.0); grid.n_samples];
    let mut rho21 = vec![C64::new(0.0, 0.0); grid.n_samples];
    let mut rho32 = vec![C64::new(0.0, 0.0); grid.n_samples];
    let mut report = InvariantReport::new();
    integrator::integrate(
        medium,
        fields,
        &drive_fn,
        grid,
        initial,
        |k, rho| {
            rho31[k] = rho.get(2, 0);
            rho21[k] = rho.get(1, 0);
            rho32[k] = rho.get(2, 1);
        },
        &mut report,
    )?;
    Ok(CoherenceTrace {
        grid,
        rho31,
        rho21,
        rho32,
        report,
    })
}

/// Like [`evolve`] but with complex probe/coupling envelopes sampled on the
/// grid (linearly interpolated between samples); used for slab propagation.
fn evolve_sampled(
    medium: &MediumParams,
    fields: &FieldParams,
    probe_env: &[C64],
    coupling_env: &[C64],
    drive: &PulsedDrive,
    grid: TimeGrid,
    initial: &DensityMatrix4,
) -> Result<CoherenceTrace> {
    let omega_c_scale = coupling_env
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    check_grid_resolution(medium, fields, omega_c_scale, drive.omega_s_peak > 0.0, grid)?;

    let interp = |env: &[C64], t: f64| -> C64 {
        let idx = (t - grid.t_start) / grid.dt;
        if idx <= 0.0 {
            return env[0];
        }
        let max = (env.len() - 1) as f64;
        if idx >= max {
            return env[env.len() - 1];
        }
        let k = idx.floor() as usize;
        let frac = idx - k as f64;
        env[k] * (1.0 - frac) + env[k + 1] * frac
    };

    let drive_fn = |t: f64| RabiAmplitudes {
        omega_p: interp(probe_env, t),
        omega_c: interp(coupling_env, t),
        omega_s: C64::new(drive.amplitude(t), 0.0),
    };

    let mut rho31 = vec![C64::new(0.0, 0.0); grid.n_samples];
    let mut rho21 = vec![C64::new(0.0, 0.0); grid.n_samples];
    let mut rho32 = vec![C64::new(0.0, 0.0); grid.n_samples];
    let mut report = InvariantReport::new();
    integrator::integrate(
        medium,
        fields,
        &drive_fn,
        grid,
        initial,
        |k, rho| {
            rho31[k] = rho.get(2, 0);
            rho21[k] = rho.get(1, 0);
            rho32[k] = rho.get(2, 1);
        },
        &mut report,
    )?;
    Ok(CoherenceTrace {
        grid,
        rho31,
        rho21,
        rho32,
        report,
    })
}

/// Calibrate the coherence-to-observable conversion on the bare two-level
/// configuration (coupling and signal off, probe resonant, closed |1⟩→|3⟩
/// cycle).
pub fn calibrate_thin_medium(
    medium: &MediumParams,
    fields: &FieldParams,
) -> Result<ThinMediumCalibration> {
    medium.validate()?;
    if !(fields.omega_p > 0.0) {
        return Err(Error::Domain(
            "zero absorptive response: probe Rabi frequency must be > 0 for calibration".into(),
        ));
    }
    if medium.d0 == 0.0 {
        return Ok(ThinMediumCalibration { scale: 0.0 });
    }
    let mut bare = *medium;
    bare.branch3 = 1.0;
    let bare_fields = FieldParams {
        omega_p: fields.omega_p,
        omega_c: 0.0,
        delta_p: 0.0,
        delta_2ph: 0.0,
        delta_s: 0.0,
    };
    let rho = steady_state(&bare, &bare_fields, 0.0)?;
    let u_ref = rho.get(2, 0).conj() / fields.omega_p;
    if !(u_ref.im > 0.0) {
        return Err(Error::Domain(format!(
            "zero absorptive response: Im(u_ref) = {:e}",
            u_ref.im
        )));
    }
    Ok(ThinMediumCalibration {
        scale: medium.d0 / u_ref.im,
    })
}

fn response_from_coherence(u: C64, scale: f64) -> (f64, f64) {
    let phase = 0.5 * scale * u.re;
    let transmission = (-scale * u.im).exp();
    (phase, transmission)
}

/// Convert a coherence trace into probe phase and transmission series.
///
/// The normalised response is `u(t) = conj(ρ₃₁(t))/Ω_p`; the phase is
/// `(A/2)·Re u` and the intensity transmission `exp(−A·Im u)` with `A` the
/// calibrated scale.
pub fn probe_response(
    trace: &CoherenceTrace,
    calib: &ThinMediumCalibration,
    fields: &FieldParams,
) -> Result<ProbeResponse> {
    if !(fields.omega_p > 0.0) {
        return Err(Error::invalid(
            "omega_p",
            "probe Rabi frequency must be > 0 to normalise the response",
        ));
    }
    let mut phase = Vec::with_capacity(trace.rho31.len());
    let mut transmission = Vec::with_capacity(trace.rho31.len());
    for z in &trace.rho31 {
        let u = z.conj() / fields.omega_p;
        let (p, t) = response_from_coherence(u, calib.scale);
        phase.push(p);
        transmission.push(t);
    }
    Ok(ProbeResponse {
        phase: PhaseTrace::new(trace.grid, phase)?,
        transmission,
    })
}

/// Steady state, pulse evolution and probe conversion in one call.
pub fn simulate_thin(
    medium: &MediumParams,
    fields: &FieldParams,
    drive: &PulsedDrive,
    grid: TimeGrid,
) -> Result<(ProbeResponse, InvariantReport)> {
    let initial = steady_state(medium, fields, 0.0)?;
    let trace = evolve(medium, fields, drive, grid, &initial)?;
    let calib = calibrate_thin_medium(medium, fields)?;
    let resp = probe_response(&trace, &calib, fields)?;
    Ok((resp, trace.report))
}

/// Propagate probe and coupling through `n_slabs` thin slices of the medium,
/// each of optical density `d0/n_slabs`; the signal is assumed undepleted.
///
/// Each slab evolves under the complex field envelopes the previous slab
/// emitted (quasi-static per-sample update); the returned phase is the
/// accumulated probe field phase at the exit face.
pub fn propagate_slabs(
    medium: &MediumParams,
    fields: &FieldParams,
    drive: &PulsedDrive,
    grid: TimeGrid,
    n_slabs: usize,
) -> Result<(ProbeResponse, InvariantReport)> {
    medium.validate()?;
    fields.validate()?;
    if n_slabs < 1 {
        return Err(Error::invalid("n_slabs", "must be >= 1"));
    }
    let od_slab = medium.d0 / n_slabs as f64;
    if od_slab > 0.5 {
        return Err(Error::Accuracy(format!(
            "per-slab optical density {od_slab:.3} exceeds 0.5; use at least {} slabs",
            (medium.d0 / 0.5).ceil() as usize
        )));
    }

    let calib = calibrate_thin_medium(medium, fields)?;
    let a_slab = calib.scale * od_slab / medium.d0.max(f64::MIN_POSITIVE);

    let n = grid.n_samples;
    let mut probe_env = vec![C64::new(fields.omega_p, 0.0); n];
    let mut coupling_env = vec![C64::new(fields.omega_c, 0.0); n];
    let mut phase_acc = vec![0.0_f64; n];
    let mut log_t_acc = vec![0.0_f64; n];
    let mut report = InvariantReport::new();
    report.min_eigenvalue = f64::INFINITY;

    for _slab in 0..n_slabs {
        // steady input fields ahead of the pulse define the slab's start state
        let rabi0 = RabiAmplitudes {
            omega_p: probe_env[0],
            omega_c: coupling_env[0],
            omega_s: C64::new(0.0, 0.0),
        };
        let initial = liouvillian::steady_state_for(medium, fields, &rabi0)?;
        let trace = evolve_sampled(
            medium,
            fields,
            &probe_env,
            &coupling_env,
            drive,
            grid,
            &initial,
        )?;

        report.max_trace_dev = report.max_trace_dev.max(trace.report.max_trace_dev);
        report.max_herm_defect = report.max_herm_defect.max(trace.report.max_herm_defect);
        report.min_eigenvalue = report.min_eigenvalue.min(trace.report.min_eigenvalue);
        report.n_steps += trace.report.n_steps;
        report.n_rejected += trace.report.n_rejected;

        for k in 0..n {
            let u_p = trace.rho31[k].conj() / probe_env[k];
            phase_acc[k] += 0.5 * a_slab * u_p.re;
            log_t_acc[k] -= a_slab * u_p.im;
            // field transfer e^{i(A/2)u} carries both phase and absorption
            probe_env[k] *= (C64::i() * 0.5 * a_slab * u_p).exp();

            let c_amp = coupling_env[k];
            if c_amp.norm() > 0.0 {
                let u_c = trace.rho32[k].conj() / c_amp;
                coupling_env[k] *= (C64::i() * 0.5 * a_slab * u_c).exp();
            }
        }
    }

    let transmission = log_t_acc.iter().map(|l| l.exp()).collect();
    Ok((
        ProbeResponse {
            phase: PhaseTrace::new(grid, phase_acc)?,
            transmission,
        },
        report,
    ))
}
