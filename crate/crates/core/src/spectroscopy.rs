//! Characterisation scans mirroring the experimental calibrations: the EIT
//! window FWHM from a probe-frequency scan and the AC Stark shift from a CW
//! signal scan.
//!
//! Scanning moves the probe detuning with the coupling fixed, so the
//! two-photon detuning equals the probe offset from the scan centre. The
//! window FWHM is measured on the transparency feature above the absorption
//! floor, which keeps the measure robust against the optical depth.

use rayon::prelude::*;

use crate::bloch;
use crate::error::{Error, Result};
use crate::math;
use crate::types::{FieldParams, MediumParams, SpectralWindow};

/// Steady-state probe response versus two-photon detuning.
#[derive(Debug, Clone)]
pub struct ScanCurve {
    /// Two-photon detuning samples, rad/s, strictly increasing.
    pub delta: Vec<f64>,
    /// Intensity transmission at each detuning.
    pub transmission: Vec<f64>,
    /// Probe phase at each detuning, rad.
    pub phase: Vec<f64>,
}

impl ScanCurve {
    pub fn validate(&self) -> Result<()> {
        if self.delta.len() != self.transmission.len() || self.delta.len() != self.phase.len() {
            return Err(Error::Shape("scan arrays must share a length".into()));
        }
        if self.delta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Shape(
                "detuning samples must be strictly ordered".into(),
            ));
        }
        if self
            .transmission
            .iter()
            .any(|&t| !(0.0..=1.000001).contains(&t))
        {
            return Err(Error::Shape("transmission outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Probe transmission/phase scan across the two-photon resonance with an
/// optional CW signal present.
pub fn transmission_scan(
    medium: &MediumParams,
    fields: &FieldParams,
    omega_s_cw: f64,
    delta_range: (f64, f64),
    n_points: usize,
) -> Result<ScanCurve> {
    if n_points < 51 {
        return Err(Error::invalid("n_points", "scan needs at least 51 points"));
    }
    if !(delta_range.1 > delta_range.0) {
        return Err(Error::invalid("delta_range", "must be increasing"));
    }
    medium.validate()?;
    fields.validate()?;
    let calib = bloch::calibrate_thin_medium(medium, fields)?;
    let coupling_detuning = fields.delta_p - fields.delta_2ph;

    let step = (delta_range.1 - delta_range.0) / (n_points - 1) as f64;
    let deltas: Vec<f64> = (0..n_points)
        .map(|k| delta_range.0 + step * k as f64)
        .collect();

    let points: Result<Vec<(f64, f64)>> = deltas
        .par_iter()
        .map(|&d2| {
            let scan_fields = FieldParams {
                delta_2ph: d2,
                delta_p: d2 + coupling_detuning,
                ..*fields
            };
            let rho = bloch::steady_state(medium, &scan_fields, omega_s_cw).map_err(|e| {
                Error::Solver {
                    reason: format!("scan point delta_2ph = {d2:.6e} rad/s failed: {e}"),
                    condition: f64::NAN,
                }
            })?;
            let u = rho.get(2, 0).conj() / fields.omega_p;
            let phase = 0.5 * calib.scale * u.re;
            let transmission = (-calib.scale * u.im).exp();
            Ok((transmission, phase))
        })
        .collect();
    let points = points?;

    let curve = ScanCurve {
        delta: deltas,
        transmission: points.iter().map(|p| p.0.min(1.000001)).collect(),
        phase: points.iter().map(|p| p.1).collect(),
    };
    curve.validate()?;
    Ok(curve)
}

/// FWHM of the transparency feature, measured between half-maximum crossings
/// of `T(δ) − T_floor` with linear interpolation between samples.
///
/// The peak is searched in the central third of the scan (the transparency
/// feature sits at the two-photon resonance by construction, while the scan
/// edges can brighten again beyond the one-photon line). The absorption
/// floor is referenced per side to the deepest point between feature and
/// edge, extrapolated with a 1/δ² tail model so that slowly decaying feature
/// wings do not bias the half-maximum level.
pub fn window_fwhm(curve: &ScanCurve) -> Result<SpectralWindow> {
    curve.validate()?;
    let n = curve.delta.len();
    if n < 9 {
        return Err(Error::Shape("scan too short".into()));
    }

    let band_lo = n / 3;
    let band_hi = n - n / 3;
    let mut k_peak = band_lo;
    let mut best = f64::NEG_INFINITY;
    for k in band_lo..band_hi {
        if curve.transmission[k] > best {
            best = curve.transmission[k];
            k_peak = k;
        }
    }
    if k_peak <= band_lo || k_peak >= band_hi - 1 {
        return Err(Error::Shape(
            "no interior transparency peak in scan range".into(),
        ));
    }

    let floor_left = side_floor(curve, k_peak, true)?;
    let floor_right = side_floor(curve, k_peak, false)?;
    let floor = 0.5 * (floor_left + floor_right);
    let height = best - floor;
    if height <= 1e-6 {
        return Err(Error::Shape(
            "no transparency feature above the absorption floor".into(),
        ));
    }
    let half = floor + 0.5 * height;

    let left = {
        let mut found = None;
        for k in (1..=k_peak).rev() {
            if curve.transmission[k - 1] < half && curve.transmission[k] >= half {
                let frac = (half - curve.transmission[k - 1])
                    / (curve.transmission[k] - curve.transmission[k - 1]);
                found = Some(curve.delta[k - 1] + frac * (curve.delta[k] - curve.delta[k - 1]));
                break;
            }
        }
        found
    };
    let right = {
        let mut found = None;
        for k in k_peak..n - 1 {
            if curve.transmission[k] >= half && curve.transmission[k + 1] < half {
                let frac = (curve.transmission[k] - half)
                    / (curve.transmission[k] - curve.transmission[k + 1]);
                found = Some(curve.delta[k] + frac * (curve.delta[k + 1] - curve.delta[k]));
                break;
            }
        }
        found
    };
    match (left, right) {
        (Some(l), Some(r)) if r > l => SpectralWindow::new(r - l),
        _ => Err(Error::Shape(
            "half-maximum crossings not found on both sides".into(),
        )),
    }
}

/// Absorption-floor estimate on one side of the peak: locate the deepest
/// sample between the feature and the scan edge, then extrapolate the local
/// samples with `T ≈ f + c/(δ − δ_peak)²` to remove the feature's tail.
fn side_floor(curve: &ScanCurve, k_peak: usize, left: bool) -> Result<f64> {
    let n = curve.delta.len();
    let (lo, hi) = if left { (0, k_peak) } else { (k_peak + 1, n) };
    if hi - lo < 3 {
        return Err(Error::Shape("no room for the absorption floor".into()));
    }
    let mut k_min = lo;
    let mut t_min = f64::INFINITY;
    for k in lo..hi {
        if curve.transmission[k] < t_min {
            t_min = curve.transmission[k];
            k_min = k;
        }
    }
    let half_band = (n / 40).max(2);
    let b_lo = k_min.saturating_sub(half_band).max(lo);
    let b_hi = (k_min + half_band + 1).min(hi);

    let d_peak = curve.delta[k_peak];
    let mut xs = Vec::with_capacity(b_hi - b_lo);
    let mut ys = Vec::with_capacity(b_hi - b_lo);
    for k in b_lo..b_hi {
        let d = curve.delta[k] - d_peak;
        if d.abs() > 0.0 {
            xs.push(1.0 / (d * d));
            ys.push(curve.transmission[k]);
        }
    }
    if xs.len() < 3 {
        return Ok(t_min);
    }
    let x_mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let spread = xs.iter().map(|x| (x - x_mean).abs()).fold(0.0, f64::max);
    if spread < 1e-6 * x_mean.abs() {
        return Ok(ys.iter().sum::<f64>() / ys.len() as f64);
    }
    let (intercept, _slope) = math::fit_line(&xs, &ys);
    // the extrapolated floor can never exceed the directly observed minimum
    Ok(intercept.min(t_min))
}

fn transparency_center(curve: &ScanCurve) -> Result<f64> {
    let n = curve.delta.len();
    // the feature is at the two-photon resonance near the scan centre
    let band_lo = (n / 4).max(1);
    let band_hi = (n - n / 4).min(n - 1);
    let mut k_peak = band_lo;
    let mut best = f64::NEG_INFINITY;
    for k in band_lo..band_hi {
        if curve.transmission[k] > best {
            best = curve.transmission[k];
            k_peak = k;
        }
    }
    let tm = curve.transmission[k_peak - 1];
    let t0 = curve.transmission[k_peak];
    let tp = curve.transmission[k_peak + 1];
    let denom = tm - 2.0 * t0 + tp;
    let step = curve.delta[k_peak] - curve.delta[k_peak - 1];
    if denom.abs() < 1e-300 {
        return Ok(curve.delta[k_peak]);
    }
    Ok(curve.delta[k_peak] + 0.5 * step * (tm - tp) / denom)
}

/// Rough transparency-window estimate used to size scan ranges.
pub fn window_estimate(medium: &MediumParams, fields: &FieldParams) -> f64 {
    fields.omega_c * fields.omega_c / medium.gamma3 + 2.0 * medium.gamma
}

/// AC Stark shift of the two-photon resonance produced by a CW signal,
/// measured as the displacement of the transparency centre.
///
/// Valid in the dispersive regime `|δ_s| ≥ 5·Ω_s`.
pub fn stark_shift(medium: &MediumParams, fields: &FieldParams, omega_s_cw: f64) -> Result<f64> {
    if omega_s_cw == 0.0 {
        return Ok(0.0);
    }
    if fields.delta_s.abs() < 5.0 * omega_s_cw {
        return Err(Error::Precondition(format!(
            "dispersive regime requires |delta_s| >= 5*omega_s: {:.3e} < {:.3e}",
            fields.delta_s.abs(),
            5.0 * omega_s_cw
        )));
    }
    let w = window_estimate(medium, fields);
    let range = (fields.delta_2ph - 5.0 * w, fields.delta_2ph + 5.0 * w);
    let reference = transmission_scan(medium, fields, 0.0, range, 2001)?;
    let shifted = transmission_scan(medium, fields, omega_s_cw, range, 2001)?;
    Ok(transparency_center(&shifted)? - transparency_center(&reference)?)
}

/// Narrowing of the measured transparency FWHM caused by exponentiating a
/// Lorentzian feature through optical depth `d0`.
fn od_narrowing(d0: f64) -> f64 {
    if d0 < 1e-6 {
        return 1.0;
    }
    let w_half = ((d0.exp() + 1.0) / 2.0).ln() / d0;
    (1.0 / w_half - 1.0).sqrt()
}

/// Expected measured window for a candidate coupling Rabi frequency.
fn expected_window(medium: &MediumParams, omega_c: f64) -> f64 {
    od_narrowing(medium.d0) * omega_c * omega_c / medium.gamma3 + 2.0 * medium.gamma
}

/// Coupling Rabi frequency that produces a transparency window of the target
/// FWHM, as measured by [`window_fwhm`] at this medium's optical density.
pub fn coupling_for_window(
    medium: &MediumParams,
    fields: &FieldParams,
    target: SpectralWindow,
) -> Result<f64> {
    let measure = |omega_c: f64| -> Result<f64> {
        let f = FieldParams { omega_c, ..*fields };
        let w_exp = expected_window(medium, omega_c).max(0.2 * target.delta_eit);
        let curve = transmission_scan(medium, &f, 0.0, (-3.5 * w_exp, 3.5 * w_exp), 1401)?;
        Ok(window_fwhm(&curve)?.delta_eit)
    };

    // analytic seed, then bracket; the measured window grows monotonically
    // with the coupling power
    let thin_needed =
        ((target.delta_eit - 2.0 * medium.gamma).max(0.1 * target.delta_eit))
            / od_narrowing(medium.d0);
    let seed = (thin_needed * medium.gamma3).sqrt();
    let mut lo = seed / 2.0;
    let mut hi = seed * 2.0;
    let mut guard = 0;
    while measure(lo)? > target.delta_eit {
        lo /= 2.0;
        guard += 1;
        if guard > 12 {
            return Err(Error::Domain(
                "could not bracket the requested window from below".into(),
            ));
        }
    }
    while measure(hi)? < target.delta_eit {
        hi *= 2.0;
        guard += 1;
        if guard > 24 {
            return Err(Error::Domain(
                "could not bracket the requested window from above".into(),
            ));
        }
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..60 {
        mid = 0.5 * (lo + hi);
        let w = measure(mid)?;
        if (w - target.delta_eit).abs() <= 1e-3 * target.delta_eit {
            return Ok(mid);
        }
        if w < target.delta_eit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}
