//! Scenario configuration, presets and provenance hashing.
//!
//! A scenario sweeps exactly one axis — transparency-window width or signal
//! pulse duration — with everything else fixed. Presets encode the reference
//! measurement campaigns; any preset can be exported to JSON, edited and fed
//! back through `run <config.json>`.

use eitxpm::detection::DetectionParams;
use eitxpm::types::MediumParams;
use eitxpm::units::{to_angular, D2_WAVELENGTH};
use serde::{Deserialize, Serialize};

/// Engine selection for trace generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    /// Closed-form response model.
    Lti,
    /// Master-equation engine, thin medium.
    Bloch,
    /// Master-equation engine with slab propagation at the full depth.
    BlochSlabs,
}

impl std::str::FromStr for EngineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lti" => Ok(EngineKind::Lti),
            "bloch" => Ok(EngineKind::Bloch),
            "bloch-slabs" => Ok(EngineKind::BlochSlabs),
            other => Err(format!("unknown engine `{other}`")),
        }
    }
}

/// The single swept axis of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Transparency-window FWHM values, Hz; pulse duration fixed.
    WindowsFwhmHz(Vec<f64>),
    /// Signal RMS durations, s; window fixed.
    DurationsS(Vec<f64>),
}

/// What kind of plot-ready summary to emit after the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryKind {
    Window,
    Duration,
}

/// How the sweep executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Generate traces, push them through detection and fitting.
    Sweep,
    /// Engine cross-check: closed-form model against the master equation.
    CrossCheck,
}

/// Signal-pulse settings; energy bookkeeping happens per sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// RMS duration of the intensity envelope, s (base value; overridden by
    /// a duration sweep).
    pub tau_s: f64,
    /// Peak power, W. Exactly one of `peak_power` and `energy` is set.
    pub peak_power: Option<f64>,
    /// Pulse energy, J, held fixed across a duration sweep.
    pub energy: Option<f64>,
    /// Carrier wavelength, m.
    pub wavelength: f64,
    /// Arrival time of the envelope peak, s.
    pub t0: f64,
}

impl PulseSpec {
    /// Peak power for a given duration, honouring the fixed-energy mode.
    pub fn peak_power_for(&self, tau_s: f64) -> f64 {
        match (self.peak_power, self.energy) {
            (Some(p), None) => p,
            (None, Some(e)) => e / ((std::f64::consts::TAU).sqrt() * tau_s),
            _ => 0.0,
        }
    }
}

/// Fixed drive geometry: probe Rabi frequency and signal carrier detuning
/// (both angular); coupling is solved per window, detunings sit on the
/// two-photon resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub omega_p: f64,
    pub delta_s: f64,
}

/// One reproducible simulation campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub description: String,
    pub kind: ScenarioKind,
    pub engine: EngineKind,
    pub medium: MediumParams,
    pub drive: DriveSpec,
    pub sweep: SweepAxis,
    /// Window FWHM, Hz, when sweeping durations.
    pub fixed_window_fwhm_hz: Option<f64>,
    pub pulse: PulseSpec,
    pub detection: DetectionParams,
    /// Coupling constant of the per-photon integrated phase, rad·s·(rad/s).
    pub coupling_const: f64,
    /// Signal Rabi frequency per square-root watt, rad/s/√W.
    pub rabi_per_sqrt_watt: f64,
    /// Slab count for the `bloch-slabs` engine.
    pub n_slabs: usize,
    /// Scenario whose sweep this summary is derived from, if any.
    pub derived_from: Option<String>,
    pub summary_kind: Option<SummaryKind>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.medium.validate()?;
        self.detection.validate()?;
        match &self.sweep {
            SweepAxis::WindowsFwhmHz(w) => {
                anyhow::ensure!(!w.is_empty(), "window sweep is empty");
                anyhow::ensure!(w.iter().all(|v| *v > 0.0), "window values must be > 0");
                anyhow::ensure!(
                    self.fixed_window_fwhm_hz.is_none(),
                    "a window sweep cannot also fix a window"
                );
            }
            SweepAxis::DurationsS(d) => {
                anyhow::ensure!(!d.is_empty(), "duration sweep is empty");
                anyhow::ensure!(d.iter().all(|v| *v > 0.0), "durations must be > 0");
                anyhow::ensure!(
                    self.fixed_window_fwhm_hz.is_some(),
                    "a duration sweep needs a fixed window"
                );
            }
        }
        anyhow::ensure!(
            self.pulse.peak_power.is_some() ^ self.pulse.energy.is_some(),
            "exactly one of pulse.peak_power and pulse.energy must be set"
        );
        anyhow::ensure!(self.n_slabs >= 1, "n_slabs must be >= 1");
        Ok(())
    }

    /// Stable 64-bit hash of the canonical JSON form, for provenance blocks.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Window grid spanning an order of magnitude in transparency width, Hz FWHM.
pub const WINDOW_GRID_HZ: [f64; 5] = [0.38e6, 0.6e6, 1.0e6, 2.0e6, 4.0e6];

/// Pulse-duration sweep grid, s.
pub const DURATION_GRID_S: [f64; 5] = [20e-9, 40e-9, 70e-9, 140e-9, 255e-9];

/// Default coupling constant of the per-photon integrated phase; calibrated
/// so the reference window sweep peaks at a few tens of mrad.
pub const DEFAULT_COUPLING_CONST: f64 = 1e-6;

/// Default signal power-to-Rabi conversion, rad/s per √W; same calibration
/// target as the coupling constant.
pub const DEFAULT_RABI_PER_SQRT_WATT: f64 = 2e10;

fn base_config(id: &str, description: &str) -> ScenarioConfig {
    ScenarioConfig {
        id: id.into(),
        description: description.into(),
        kind: ScenarioKind::Sweep,
        engine: EngineKind::Lti,
        medium: MediumParams::rb_d2(3.0),
        drive: DriveSpec {
            omega_p: to_angular(50e3),
            delta_s: to_angular(40e6),
        },
        sweep: SweepAxis::WindowsFwhmHz(WINDOW_GRID_HZ.to_vec()),
        fixed_window_fwhm_hz: None,
        pulse: PulseSpec {
            tau_s: 40e-9,
            peak_power: Some(0.8e-6),
            energy: None,
            wavelength: D2_WAVELENGTH,
            t0: 0.0,
        },
        detection: DetectionParams::default(),
        coupling_const: DEFAULT_COUPLING_CONST,
        rabi_per_sqrt_watt: DEFAULT_RABI_PER_SQRT_WATT,
        n_slabs: 6,
        derived_from: None,
        summary_kind: None,
        seed: 1,
    }
}

/// Build a preset by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "fig2" => Some(base_config(
            "fig2",
            "temporal XPM profiles: 40 ns (RMS), 0.8 uW peak pulse across window widths at OD 3",
        )),
        "fig3" => {
            let mut c = base_config(
                "fig3",
                "peak and integrated phase versus window width, summarised from the fig2 sweep",
            );
            c.derived_from = Some("fig2".into());
            c.summary_kind = Some(SummaryKind::Window);
            Some(c)
        }
        "fig4" => {
            let mut c = base_config(
                "fig4",
                "rise/fall times versus window width: 140 ns pulse, 160 nW peak, OD 1.8",
            );
            c.medium = MediumParams::rb_d2(1.8);
            c.pulse.tau_s = 140e-9;
            c.pulse.peak_power = Some(160e-9);
            c.derived_from = None;
            c.summary_kind = Some(SummaryKind::Window);
            Some(c)
        }
        "fig5" => {
            let mut c = base_config(
                "fig5",
                "temporal profiles versus pulse duration at fixed 75 fJ energy and a 600 kHz window",
            );
            c.sweep = SweepAxis::DurationsS(DURATION_GRID_S.to_vec());
            c.fixed_window_fwhm_hz = Some(0.6e6);
            c.pulse.peak_power = None;
            c.pulse.energy = Some(75e-15);
            Some(c)
        }
        "fig6" => {
            let mut c = preset("fig5")?;
            c.id = "fig6".into();
            c.description =
                "rise/fall times versus pulse duration, summarised from the fig5 sweep".into();
            c.derived_from = Some("fig5".into());
            c.summary_kind = Some(SummaryKind::Duration);
            Some(c)
        }
        "validation-lti-vs-bloch" => {
            let mut c = base_config(
                "validation-lti-vs-bloch",
                "cross-check: weak-signal master-equation traces against the closed-form model",
            );
            c.kind = ScenarioKind::CrossCheck;
            c.engine = EngineKind::BlochSlabs;
            c.detection.n_shots = 1;
            c.detection.atom_fluct_rms = 0.0;
            c.detection.detector_noise_rms = 0.0;
            Some(c)
        }
        _ => None,
    }
}

/// Names of all built-in presets.
pub const PRESET_NAMES: [&str; 6] = [
    "fig2",
    "fig3",
    "fig4",
    "fig5",
    "fig6",
    "validation-lti-vs-bloch",
];

/// Human-readable preset listing.
pub fn list_presets() -> Vec<(String, String, Option<String>)> {
    PRESET_NAMES
        .iter()
        .map(|name| {
            let c = preset(name).expect("preset exists");
            (c.id.clone(), c.description.clone(), c.derived_from.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_six_presets_exist() {
        let listing = list_presets();
        assert_eq!(listing.len(), 6);
        let names: Vec<&str> = listing.iter().map(|(n, _, _)| n.as_str()).collect();
        assert_eq!(
            names,
            vec!["fig2", "fig3", "fig4", "fig5", "fig6", "validation-lti-vs-bloch"]
        );
        assert!(preset("fig7").is_none());
    }

    #[test]
    fn presets_round_trip_through_serialization() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            let json = serde_json::to_string_pretty(&c).unwrap();
            let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(c, back, "round trip changed preset {name}");
        }
    }

    #[test]
    fn fig3_derives_from_fig2() {
        let c = preset("fig3").unwrap();
        assert_eq!(c.derived_from.as_deref(), Some("fig2"));
        let c6 = preset("fig6").unwrap();
        assert_eq!(c6.derived_from.as_deref(), Some("fig5"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = preset("fig2").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn sweep_axis_exclusivity_is_enforced() {
        let mut c = preset("fig2").unwrap();
        c.fixed_window_fwhm_hz = Some(1e6);
        assert!(c.validate().is_err());

        let mut c = preset("fig5").unwrap();
        c.fixed_window_fwhm_hz = None;
        assert!(c.validate().is_err());

        let mut c = preset("fig2").unwrap();
        c.pulse.energy = Some(1e-15);
        assert!(c.validate().is_err());
    }
}
