//! Result tables and file export: per-trace CSVs, sweep summaries and
//! plot-ready data with theory-overlay columns.
//!
//! Every file starts with provenance comment lines (config hash, code
//! version, seed) so outputs are traceable to the exact configuration.

use std::io::Write;
use std::path::Path;

use eitxpm::math;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, SummaryKind};

/// Per-sweep-point results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub index: usize,
    /// Window FWHM, Hz (the sweep value for window sweeps).
    pub window_fwhm_hz: f64,
    /// Pulse RMS duration, s (the sweep value for duration sweeps).
    pub tau_s_pulse_s: f64,
    pub n_ph: f64,
    pub peak_phase_rad: f64,
    pub integrated_phase_rad_s: f64,
    pub rise_s: f64,
    pub rise_sigma_s: f64,
    pub fall_s: f64,
    pub fall_sigma_s: f64,
    pub one_over_e_s: Option<f64>,
    /// Response-time prediction for this point's window, s.
    pub eq2_fall_s: f64,
    pub trace_file: String,
}

/// Sweep results plus provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
}

impl Provenance {
    pub fn for_config(config: &ScenarioConfig) -> Self {
        Provenance {
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
        }
    }

    pub fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("config_hash={}", self.config_hash),
            format!("version={}", self.version),
            format!("seed={}", self.seed),
        ]
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

/// Write the per-point summary table.
pub fn write_summary_csv(path: &Path, table: &ResultTable) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    for line in table.provenance.comment_lines() {
        writeln!(f, "# {line}")?;
    }
    writeln!(
        f,
        "index,window_fwhm_hz,tau_s_pulse_s,n_ph,peak_phase_rad,integrated_phase_rad_s,\
         rise_s,rise_sigma_s,fall_s,fall_sigma_s,one_over_e_s,eq2_fall_s,trace_file"
    )?;
    for r in &table.rows {
        writeln!(
            f,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{}",
            r.index,
            r.window_fwhm_hz,
            r.tau_s_pulse_s,
            r.n_ph,
            r.peak_phase_rad,
            r.integrated_phase_rad_s,
            r.rise_s,
            r.rise_sigma_s,
            r.fall_s,
            r.fall_sigma_s,
            fmt_opt(r.one_over_e_s),
            r.eq2_fall_s,
            r.trace_file
        )?;
    }
    Ok(())
}

/// Least-squares calibration of the integrated-phase model against the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingFit {
    /// Fitted coupling constant, rad·s·(rad/s).
    pub coupling_const: f64,
    pub r_squared: f64,
}

/// Fit `integrated = C·n_ph·(1/Δ)(1 − 2γ/Δ)` over the window-sweep rows.
pub fn fit_coupling_const(table: &ResultTable, gamma: f64) -> Option<CouplingFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &table.rows {
        let delta = eitxpm::units::to_angular(r.window_fwhm_hz);
        if delta <= 0.0 {
            continue;
        }
        xs.push(r.n_ph / delta * (1.0 - 2.0 * gamma / delta));
        ys.push(r.integrated_phase_rad_s);
    }
    if xs.len() < 2 {
        return None;
    }
    let (c, r2) = math::fit_proportional(&xs, &ys);
    Some(CouplingFit {
        coupling_const: c,
        r_squared: r2,
    })
}

/// Plot-ready CSV with theory-overlay columns.
///
/// Window sweeps append the response-time prediction, the fitted
/// dephasing-corrected integrated-phase curve and the dephasing-free 1/Δ
/// reference (anchored on the three widest windows). Duration sweeps append
/// the constant response-time line and the rise = τ_s reference.
pub fn write_plotdata_csv(
    path: &Path,
    table: &ResultTable,
    kind: SummaryKind,
    gamma: f64,
) -> std::io::Result<Option<CouplingFit>> {
    let mut f = std::fs::File::create(path)?;
    for line in table.provenance.comment_lines() {
        writeln!(f, "# {line}")?;
    }
    match kind {
        SummaryKind::Window => {
            let cfit = fit_coupling_const(table, gamma);
            // dephasing-free reference from the three widest windows
            let mut wide: Vec<&ResultRow> = table.rows.iter().collect();
            wide.sort_by(|a, b| b.window_fwhm_hz.partial_cmp(&a.window_fwhm_hz).unwrap());
            let (xs, ys): (Vec<f64>, Vec<f64>) = wide
                .iter()
                .take(3)
                .map(|r| {
                    (
                        r.n_ph / eitxpm::units::to_angular(r.window_fwhm_hz),
                        r.integrated_phase_rad_s,
                    )
                })
                .unzip();
            let (c0, _) = math::fit_proportional(&xs, &ys);

            writeln!(
                f,
                "window_fwhm_hz,peak_phase_rad,integrated_phase_rad_s,rise_s,rise_sigma_s,\
                 fall_s,fall_sigma_s,eq2_fall_s,integrated_cfit_rad_s,integrated_gamma0_ref_rad_s"
            )?;
            for r in &table.rows {
                let delta = eitxpm::units::to_angular(r.window_fwhm_hz);
                let model = cfit
                    .as_ref()
                    .map(|c| c.coupling_const * r.n_ph / delta * (1.0 - 2.0 * gamma / delta))
                    .unwrap_or(f64::NAN);
                let reference = c0 * r.n_ph / delta;
                writeln!(
                    f,
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    r.window_fwhm_hz,
                    r.peak_phase_rad,
                    r.integrated_phase_rad_s,
                    r.rise_s,
                    r.rise_sigma_s,
                    r.fall_s,
                    r.fall_sigma_s,
                    r.eq2_fall_s,
                    model,
                    reference
                )?;
            }
            Ok(cfit)
        }
        SummaryKind::Duration => {
            writeln!(
                f,
                "tau_s_pulse_s,peak_phase_rad,integrated_phase_rad_s,rise_s,rise_sigma_s,\
                 fall_s,fall_sigma_s,eq2_fall_s,rise_reference_s"
            )?;
            for r in &table.rows {
                writeln!(
                    f,
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    r.tau_s_pulse_s,
                    r.peak_phase_rad,
                    r.integrated_phase_rad_s,
                    r.rise_s,
                    r.rise_sigma_s,
                    r.fall_s,
                    r.fall_sigma_s,
                    r.eq2_fall_s,
                    r.tau_s_pulse_s
                )?;
            }
            Ok(None)
        }
    }
}

/// Complete machine-readable record of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub config: ScenarioConfig,
    pub provenance: Provenance,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<String>,
    pub coupling_fit: Option<CouplingFit>,
}

pub fn write_summary_json(path: &Path, doc: &SummaryDocument) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(doc)?;
    std::fs::write(path, json)?;
    Ok(())
}
