//! Beat-note interferometry readout: reference/probe beat synthesis,
//! quadrature demodulation with a windowed-sinc low pass, boxcar averaging
//! into detector bins, and multi-shot averaging with atom-number and
//! detector noise.
//!
//! The raw detector signal is `V(t) = |E_r e^{−i2πf_b t} + E_p √T(t) e^{iφ(t)}|²`
//! with unit field amplitudes; the co-propagating reference is far enough
//! detuned that it carries no signal-induced phase. Demodulation multiplies
//! by quadrature references at the beat frequency, low-passes at `f_b/4`
//! (Blackman-windowed sinc, flat to well beyond the signal bandwidth),
//! forms `arg(I + iQ)` and boxcar-averages into bins of the sampling
//! period, unwrapping across bins.
//!
//! Per-shot random streams derive from `(seed, shot index)`, so parallel and
//! serial execution agree exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::trace::PhaseTrace;
use crate::types::TimeGrid;

/// Detection-chain settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Beat (reference offset) frequency, Hz.
    pub f_beat: f64,
    /// Boxcar sampling period of the digitiser, s.
    pub sampling_period: f64,
    /// Number of averaged signal pulses.
    pub n_shots: usize,
    /// RMS fractional atom-number fluctuation (scales the phase amplitude).
    pub atom_fluct_rms: f64,
    /// White detector noise, phase-equivalent rad per raw sample.
    pub detector_noise_rms: f64,
    /// Seed of the shot-noise random streams.
    pub rng_seed: u64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            f_beat: 100e6,
            sampling_period: 67e-9,
            n_shots: 2500,
            atom_fluct_rms: 0.15,
            detector_noise_rms: 0.1,
            rng_seed: 1,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_beat > 0.0) {
            return Err(Error::invalid("f_beat", "must be > 0"));
        }
        if !(self.sampling_period > 0.0) {
            return Err(Error::invalid("sampling_period", "must be > 0"));
        }
        if self.n_shots < 1 {
            return Err(Error::invalid("n_shots", "must be >= 1"));
        }
        if !(self.atom_fluct_rms >= 0.0) {
            return Err(Error::invalid("atom_fluct_rms", "must be >= 0"));
        }
        if !(self.detector_noise_rms >= 0.0) {
            return Err(Error::invalid("detector_noise_rms", "must be >= 0"));
        }
        Ok(())
    }
}

/// Raw detector series on an oversampled grid.
#[derive(Debug, Clone)]
pub struct RawSeries {
    pub grid: TimeGrid,
    pub samples: Vec<f64>,
}

fn oversampled_grid(phase: &PhaseTrace, params: &DetectionParams, oversample: usize) -> Result<TimeGrid> {
    if oversample < 1 {
        return Err(Error::invalid("oversample", "must be >= 1"));
    }
    let dt = phase.grid.dt / oversample as f64;
    let rate = 1.0 / dt;
    if rate < 8.0 * params.f_beat {
        return Err(Error::Sampling(format!(
            "oversampled rate {rate:.3e} Hz is below the 8x beat-frequency margin ({:.3e} Hz)",
            8.0 * params.f_beat
        )));
    }
    TimeGrid::new(
        phase.grid.t_start,
        dt,
        (phase.grid.n_samples - 1) * oversample + 1,
    )
}

fn resample(values: &[f64], from: &TimeGrid, to: &TimeGrid) -> Vec<f64> {
    to.times()
        .map(|t| math::lerp_at(values, (t - from.t_start) / from.dt))
        .collect()
}

fn beat_samples(
    grid: &TimeGrid,
    phase_os: &[f64],
    trans_os: Option<&[f64]>,
    f_beat: f64,
) -> Vec<f64> {
    let omega = std::f64::consts::TAU * f_beat;
    grid.times()
        .enumerate()
        .map(|(k, t)| {
            let amp = trans_os.map(|tr| tr[k].max(0.0).sqrt()).unwrap_or(1.0);
            let beat = omega * t + phase_os[k];
            1.0 + amp * amp + 2.0 * amp * beat.cos()
        })
        .collect()
}

/// Synthesise the raw beat-note detector signal for a phase trace.
///
/// The input grid is refined `oversample`-fold; the refined rate must stay
/// at least eight times above the beat frequency.
pub fn synthesize_beat(
    phase: &PhaseTrace,
    transmission: Option<&[f64]>,
    params: &DetectionParams,
    oversample: usize,
) -> Result<RawSeries> {
    params.validate()?;
    if let Some(tr) = transmission {
        if tr.len() != phase.len() {
            return Err(Error::Grid("transmission length mismatch".into()));
        }
    }
    let grid = oversampled_grid(phase, params, oversample)?;
    let phase_os = resample(&phase.phase, &phase.grid, &grid);
    let trans_os = transmission.map(|tr| resample(tr, &phase.grid, &grid));
    let samples = beat_samples(&grid, &phase_os, trans_os.as_deref(), params.f_beat);
    Ok(RawSeries { grid, samples })
}

fn lowpass_kernel(fs: f64, cutoff: f64) -> Vec<f64> {
    // Blackman-windowed sinc; length covers four transition widths
    let m = {
        let taps = (2.0 * fs / cutoff).round() as usize * 2 + 1;
        taps.max(31)
    };
    let mid = (m / 2) as isize;
    let fc = cutoff / fs;
    let mut kernel = Vec::with_capacity(m);
    for i in 0..m as isize {
        let x = (i - mid) as f64;
        let sinc = if x == 0.0 {
            2.0 * fc
        } else {
            (std::f64::consts::TAU * fc * x).sin() / (std::f64::consts::PI * x)
        };
        let w = 0.42
            - 0.5 * (std::f64::consts::TAU * i as f64 / (m - 1) as f64).cos()
            + 0.08 * (2.0 * std::f64::consts::TAU * i as f64 / (m - 1) as f64).cos();
        kernel.push(sinc * w);
    }
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    kernel
}

// filtered values where the kernel fully overlaps the data; the first
// output sample corresponds to input index (kernel length - 1)/2
fn filtered_valid(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let m = kernel.len();
    if x.len() < m {
        return Vec::new();
    }
    (0..=x.len() - m)
        .map(|start| {
            let mut acc = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                acc += k * x[start + j];
            }
            acc
        })
        .collect()
}

/// Demodulate a raw detector series at the beat frequency and boxcar-average
/// into detector bins.
pub fn demodulate(raw: &RawSeries, params: &DetectionParams) -> Result<PhaseTrace> {
    params.validate()?;
    let dt = raw.grid.dt;
    let beat_periods_per_bin = params.sampling_period * params.f_beat;
    if beat_periods_per_bin < 3.0 {
        return Err(Error::Resolution(format!(
            "{beat_periods_per_bin:.2} beat periods per output sample; need at least 3"
        )));
    }
    let per_bin = (params.sampling_period / dt).round() as usize;
    if per_bin < 2 || raw.samples.len() < per_bin {
        return Err(Error::Resolution(
            "raw series too short for one output bin".into(),
        ));
    }

    let omega = std::f64::consts::TAU * params.f_beat;
    let n = raw.samples.len();
    let mut i_raw = Vec::with_capacity(n);
    let mut q_raw = Vec::with_capacity(n);
    for (k, t) in raw.grid.times().enumerate() {
        let (s, c) = (omega * t).sin_cos();
        i_raw.push(raw.samples[k] * c);
        q_raw.push(-raw.samples[k] * s);
    }
    let kernel = lowpass_kernel(1.0 / dt, params.f_beat / 4.0);
    let i_f = filtered_valid(&i_raw, &kernel);
    let q_f = filtered_valid(&q_raw, &kernel);
    // filter transients are discarded, so the usable series starts half a
    // kernel into the record
    let offset = kernel.len() / 2;

    let phase_os: Vec<f64> = i_f
        .iter()
        .zip(&q_f)
        .map(|(i, q)| q.atan2(*i))
        .collect();

    let n_bins = phase_os.len() / per_bin;
    if n_bins == 0 {
        return Err(Error::Resolution(
            "raw series too short once filter transients are dropped".into(),
        ));
    }
    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let slice = &phase_os[b * per_bin..(b + 1) * per_bin];
        bins.push(slice.iter().sum::<f64>() / per_bin as f64);
    }
    math::unwrap_phase(&mut bins);

    let grid = TimeGrid::new(
        raw.grid.t_start + (offset as f64 + 0.5 * per_bin as f64) * dt,
        per_bin as f64 * dt,
        n_bins,
    )?;
    PhaseTrace::new(grid, bins)
}

fn shot_seed(seed: u64, shot: u64) -> u64 {
    // splitmix64 over a golden-ratio stride
    let mut z = seed ^ shot.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run the full multi-shot measurement: per shot the phase amplitude scales
/// by `1 + ε` with `ε ~ N(0, atom_fluct_rms)`, white detector phase noise is
/// added per raw sample, the shot is demodulated, and all shot traces are
/// averaged pointwise with per-bin standard errors.
pub fn run_shots(
    phase: &PhaseTrace,
    transmission: Option<&[f64]>,
    params: &DetectionParams,
    oversample: usize,
) -> Result<PhaseTrace> {
    params.validate()?;
    let grid = oversampled_grid(phase, params, oversample)?;
    let phase_os = resample(&phase.phase, &phase.grid, &grid);
    let trans_os = transmission.map(|tr| resample(tr, &phase.grid, &grid));

    let shots: Result<Vec<Vec<f64>>> = (0..params.n_shots as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(shot_seed(params.rng_seed, shot));
            let scale = if params.atom_fluct_rms > 0.0 {
                let fluct = Normal::new(0.0, params.atom_fluct_rms)
                    .map_err(|e| Error::invalid("atom_fluct_rms", e.to_string()))?;
                1.0 + fluct.sample(&mut rng)
            } else {
                1.0
            };
            let mut shot_phase: Vec<f64> = phase_os.iter().map(|p| p * scale).collect();
            if params.detector_noise_rms > 0.0 {
                let det = Normal::new(0.0, params.detector_noise_rms)
                    .map_err(|e| Error::invalid("detector_noise_rms", e.to_string()))?;
                for v in &mut shot_phase {
                    *v += det.sample(&mut rng);
                }
            }
            let samples = beat_samples(&grid, &shot_phase, trans_os.as_deref(), params.f_beat);
            let raw = RawSeries { grid, samples };
            Ok(demodulate(&raw, params)?.phase)
        })
        .collect();
    let shots = shots?;

    let n_bins = shots[0].len();
    let n = shots.len() as f64;
    let mut mean = vec![0.0; n_bins];
    for shot in &shots {
        for (m, v) in mean.iter_mut().zip(shot) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut stderr = vec![0.0; n_bins];
    if shots.len() > 1 {
        for shot in &shots {
            for (s, (v, m)) in stderr.iter_mut().zip(shot.iter().zip(&mean)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stderr {
            *s = (*s / (n - 1.0)).sqrt() / n.sqrt();
        }
    }

    let kernel_len = lowpass_kernel(1.0 / grid.dt, params.f_beat / 4.0).len();
    let per_bin = (params.sampling_period / grid.dt).round() as usize;
    let bin_grid = TimeGrid::new(
        grid.t_start + (kernel_len / 2) as f64 * grid.dt + 0.5 * per_bin as f64 * grid.dt,
        per_bin as f64 * grid.dt,
        n_bins,
    )?;
    PhaseTrace::new(bin_grid, mean)?.with_stderr(stderr)
}
