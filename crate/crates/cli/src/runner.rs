//! Sweep execution: per-point trace generation (closed-form or
//! master-equation engine), detection-chain emulation, fitting and export.
//!
//! Points run in a bounded worker pool (size from `EITXPM_WORKERS`, default
//! all cores); outputs are written in sweep order regardless of completion
//! order, and per-point random streams derive from (seed, point index), so
//! a rerun with the same configuration and seed is byte-identical.

use std::path::{Path, PathBuf};

use anyhow::Context;
use eitxpm::bloch::{self, PulsedDrive};
use eitxpm::detection::{self, DetectionParams};
use eitxpm::fit;
use eitxpm::lti::{self, LtiKernel};
use eitxpm::spectroscopy;
use eitxpm::trace::PhaseTrace;
use eitxpm::types::{FieldParams, MediumParams, SignalPulse, SpectralWindow, TimeGrid};
use eitxpm::units::to_angular;
use rayon::prelude::*;

use crate::config::{EngineKind, ScenarioConfig, ScenarioKind, SweepAxis};
use crate::export::{self, Provenance, ResultRow, ResultTable, SummaryDocument};

/// Detector-grid spacing for synthesised traces, s.
const DETECTION_DT: f64 = 1e-9;

/// Optical density of the reference medium used to characterise the
/// intrinsic (thin-medium) transparency window.
const THIN_REFERENCE_OD: f64 = 0.05;

/// Outcome of a sweep run.
#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub n_points: usize,
    pub n_failed: usize,
}

pub fn worker_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("EITXPM_WORKERS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("EITXPM_WORKERS must be a positive integer, got `{v}`"))?;
        builder = builder.num_threads(n.max(1));
    }
    Ok(builder.build()?)
}

fn point_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sweep-point working parameters.
struct Point {
    index: usize,
    window: SpectralWindow,
    pulse: SignalPulse,
}

fn sweep_points(config: &ScenarioConfig) -> anyhow::Result<Vec<Point>> {
    let mut points = Vec::new();
    match &config.sweep {
        SweepAxis::WindowsFwhmHz(windows) => {
            for (index, &w_hz) in windows.iter().enumerate() {
                let window = SpectralWindow::from_fwhm_hz(w_hz)?;
                let tau_s = config.pulse.tau_s;
                let pulse = SignalPulse::from_peak_power(
                    tau_s,
                    config.pulse.peak_power_for(tau_s),
                    config.pulse.t0,
                    config.pulse.wavelength,
                )?;
                points.push(Point {
                    index,
                    window,
                    pulse,
                });
            }
        }
        SweepAxis::DurationsS(durations) => {
            let w_hz = config
                .fixed_window_fwhm_hz
                .context("duration sweep needs fixed_window_fwhm_hz")?;
            let window = SpectralWindow::from_fwhm_hz(w_hz)?;
            for (index, &tau_s) in durations.iter().enumerate() {
                let pulse = SignalPulse::from_peak_power(
                    tau_s,
                    config.pulse.peak_power_for(tau_s),
                    config.pulse.t0,
                    config.pulse.wavelength,
                )?;
                points.push(Point {
                    index,
                    window,
                    pulse,
                });
            }
        }
    }
    Ok(points)
}

/// Common detection-grid span covering every point of the sweep.
fn common_grid(config: &ScenarioConfig, points: &[Point]) -> anyhow::Result<TimeGrid> {
    let mut tau_max: f64 = 0.0;
    let mut tau_s_max: f64 = 0.0;
    for p in points {
        let tau = lti::response_time(p.window, &config.medium)?;
        tau_max = tau_max.max(tau);
        tau_s_max = tau_s_max.max(p.pulse.tau_s);
    }
    let t_start = -(8.0 * tau_s_max).max(0.7e-6);
    let t_end = (6.0 * tau_max).max(8.0 * tau_s_max).max(2.0e-6);
    Ok(TimeGrid::spanning(t_start, t_end, DETECTION_DT)?)
}

fn thin_reference(medium: &MediumParams) -> MediumParams {
    MediumParams {
        d0: THIN_REFERENCE_OD,
        ..*medium
    }
}

fn drive_fields(config: &ScenarioConfig, omega_c: f64) -> FieldParams {
    FieldParams {
        omega_p: config.drive.omega_p,
        omega_c,
        delta_p: 0.0,
        delta_2ph: 0.0,
        delta_s: config.drive.delta_s,
    }
}

/// Phase/transmission trace for one sweep point on the detection grid.
fn generate_trace(
    config: &ScenarioConfig,
    point: &Point,
    grid: TimeGrid,
) -> anyhow::Result<(PhaseTrace, Option<Vec<f64>>)> {
    match config.engine {
        EngineKind::Lti => {
            let kernel = LtiKernel::for_window(point.window, &config.medium, config.coupling_const)?;
            let phase: Vec<f64> = grid
                .times()
                .map(|t| lti::phase_profile(t, &kernel, &point.pulse))
                .collect();
            Ok((PhaseTrace::new(grid, phase)?, None))
        }
        EngineKind::Bloch | EngineKind::BlochSlabs => {
            // the coupling is set against the intrinsic (thin-medium) window
            let thin = thin_reference(&config.medium);
            let probe = drive_fields(config, to_angular(1e6));
            let omega_c = spectroscopy::coupling_for_window(&thin, &probe, point.window)?;
            let fields = drive_fields(config, omega_c);
            let drive = PulsedDrive::from_pulse(&point.pulse, config.rabi_per_sqrt_watt)?;

            // integrate on a refined grid that resolves the fastest rate,
            // then decimate back onto the detection grid
            let fastest = config
                .medium
                .gamma3
                .max(config.medium.gamma4)
                .max(omega_c)
                .max(config.drive.delta_s.abs());
            let sub = (grid.dt * fastest / 0.05).ceil() as usize;
            let fine = TimeGrid::new(
                grid.t_start,
                grid.dt / sub as f64,
                (grid.n_samples - 1) * sub + 1,
            )?;

            let (resp, _report) = match config.engine {
                EngineKind::Bloch => bloch::simulate_thin(&config.medium, &fields, &drive, fine)?,
                _ => bloch::propagate_slabs(
                    &config.medium,
                    &fields,
                    &drive,
                    fine,
                    config.n_slabs,
                )?,
            };
            let phase: Vec<f64> = resp.phase.phase.iter().step_by(sub).copied().collect();
            let trans: Vec<f64> = resp.transmission.iter().step_by(sub).copied().collect();
            Ok((PhaseTrace::new(grid, phase)?, Some(trans)))
        }
    }
}

fn point_label(config: &ScenarioConfig, point: &Point) -> String {
    match &config.sweep {
        SweepAxis::WindowsFwhmHz(_) => {
            format!("w{:.2}MHz", point.window.fwhm_hz() / 1e6)
        }
        SweepAxis::DurationsS(_) => format!("ts{:.0}ns", point.pulse.tau_s * 1e9),
    }
}

fn execute_point(
    config: &ScenarioConfig,
    point: &Point,
    grid: TimeGrid,
) -> anyhow::Result<(ResultRow, PhaseTrace)> {
    let (clean, transmission) = generate_trace(config, point, grid)?;
    let params = DetectionParams {
        rng_seed: point_seed(config.seed, point.index as u64),
        ..config.detection
    };
    let averaged = detection::run_shots(&clean, transmission.as_deref(), &params, 1)?;

    let fitted = fit::fit_phase_profile(&averaged, None, None)?;
    let ((rise, rise_sigma), (fall, fall_sigma)) = fit::rise_fall_times(&fitted)?;
    let peak = averaged.max_phase() - fitted.baseline;
    let eq2 = lti::response_time(point.window, &config.medium)?;
    let trace_file = format!("trace_{:02}_{}.csv", point.index, point_label(config, point));

    Ok((
        ResultRow {
            index: point.index,
            window_fwhm_hz: point.window.fwhm_hz(),
            tau_s_pulse_s: point.pulse.tau_s,
            n_ph: point.pulse.n_ph,
            peak_phase_rad: peak,
            integrated_phase_rad_s: fitted.amplitude,
            rise_s: rise,
            rise_sigma_s: rise_sigma,
            fall_s: fall,
            fall_sigma_s: fall_sigma,
            one_over_e_s: fit::one_over_e_time(&averaged),
            eq2_fall_s: eq2,
            trace_file,
        },
        averaged,
    ))
}

/// Run a sweep scenario end to end, writing traces, the summary table and
/// optional plot data into `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> anyhow::Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;

    if config.kind == ScenarioKind::CrossCheck {
        return run_cross_check(config, out_dir);
    }

    let points = sweep_points(config)?;
    let grid = common_grid(config, &points)?;
    let pool = worker_pool()?;

    let outcomes: Vec<(usize, anyhow::Result<(ResultRow, PhaseTrace)>)> = pool.install(|| {
        points
            .par_iter()
            .map(|p| (p.index, execute_point(config, p, grid)))
            .collect()
    });

    let provenance = Provenance::for_config(config);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (index, outcome) in outcomes {
        match outcome {
            Ok((row, trace)) => {
                let path = out_dir.join(&row.trace_file);
                let file = std::fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                trace.write_csv(file, &provenance.comment_lines())?;
                rows.push(row);
            }
            Err(e) => failures.push(format!("point {index}: {e:#}")),
        }
    }
    rows.sort_by_key(|r| r.index);

    let table = ResultTable {
        rows,
        failures: failures.clone(),
        provenance: provenance.clone(),
    };
    export::write_summary_csv(&out_dir.join("summary.csv"), &table)?;

    let coupling_fit = match config.summary_kind {
        Some(kind) => export::write_plotdata_csv(
            &out_dir.join("plotdata.csv"),
            &table,
            kind,
            config.medium.gamma,
        )?,
        None => None,
    };

    let doc = SummaryDocument {
        config: config.clone(),
        provenance,
        rows: table.rows.clone(),
        failures: failures.clone(),
        coupling_fit,
    };
    export::write_summary_json(&out_dir.join("summary.json"), &doc)?;

    Ok(RunReport {
        out_dir: out_dir.to_path_buf(),
        n_points: points.len(),
        n_failed: failures.len(),
    })
}

/// One window's cross-check numbers.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CrossCheckRow {
    pub window_fwhm_hz: f64,
    /// Fit residual RMS relative to the trace peak.
    pub shape_rms_rel: f64,
    pub integrated_phase_rad_s: f64,
    /// Relative deviation from the calibrated integrated-phase model.
    pub integrated_dev_rel: f64,
    pub rise_s: f64,
    pub fall_s: f64,
    pub eq2_fall_s: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CrossCheckReport {
    pub rows: Vec<CrossCheckRow>,
    pub coupling_const: f64,
    pub r_squared: f64,
    pub worst_shape_rms_rel: f64,
    pub worst_integrated_dev_rel: f64,
    pub rise_spread_rel: f64,
    pub passed: bool,
}

/// Weak-signal master-equation traces across the window grid, fitted with
/// the closed-form model and compared against the dephasing-corrected
/// integrated-phase law.
pub fn cross_check(config: &ScenarioConfig) -> anyhow::Result<CrossCheckReport> {
    let windows: Vec<SpectralWindow> = match &config.sweep {
        SweepAxis::WindowsFwhmHz(w) => w
            .iter()
            .map(|&hz| SpectralWindow::from_fwhm_hz(hz))
            .collect::<Result<_, _>>()?,
        _ => anyhow::bail!("the cross-check sweeps windows"),
    };
    let gamma = config.medium.gamma;
    let delta_s = config.drive.delta_s;

    // one weak signal pulse for every window: Stark excursion at 4% of the
    // narrowest window keeps the response linear everywhere
    let delta_min = windows
        .iter()
        .map(|w| w.delta_eit)
        .fold(f64::INFINITY, f64::min);
    let omega_s = (4.0 * delta_s.abs() * 0.04 * delta_min).sqrt();
    let drive = PulsedDrive::new(omega_s, config.pulse.tau_s, 0.0)?;

    let pool = worker_pool()?;
    let rows: anyhow::Result<Vec<(CrossCheckRow, f64)>> = pool.install(|| {
        windows
            .par_iter()
            .map(|&window| {
                let thin = thin_reference(&config.medium);
                let probe = drive_fields(config, to_angular(1e6));
                let omega_c = spectroscopy::coupling_for_window(&thin, &probe, window)?;
                let fields = drive_fields(config, omega_c);

                let eq2 = lti::response_time(window, &config.medium)?;
                let t_end = (6.0 * eq2).max(12.0 * config.pulse.tau_s).max(2e-6);
                let fastest = config
                    .medium
                    .gamma3
                    .max(omega_c)
                    .max(delta_s.abs());
                let sub = (DETECTION_DT * fastest / 0.05).ceil() as usize;
                let fine = TimeGrid::spanning(-0.7e-6, t_end, DETECTION_DT / sub as f64)?;

                let (resp, _) = bloch::propagate_slabs(
                    &config.medium,
                    &fields,
                    &drive,
                    fine,
                    config.n_slabs,
                )?;
                let phase: Vec<f64> = resp.phase.phase.iter().step_by(sub).copied().collect();
                let grid = TimeGrid::new(fine.t_start, fine.dt * sub as f64, phase.len())?;
                let trace = PhaseTrace::new(grid, phase)?;

                let fitted = fit::fit_phase_profile(&trace, None, None)?;
                anyhow::ensure!(fitted.converged, "fit failed at {:.2} MHz", window.fwhm_hz() / 1e6);
                let peak = trace.max_phase() - fitted.baseline;
                let area = fitted.amplitude;
                Ok((
                    CrossCheckRow {
                        window_fwhm_hz: window.fwhm_hz(),
                        shape_rms_rel: fitted.residual_rms / peak,
                        integrated_phase_rad_s: area,
                        integrated_dev_rel: f64::NAN, // filled after calibration
                        rise_s: fitted.tau_s,
                        fall_s: fitted.tau,
                        eq2_fall_s: eq2,
                    },
                    window.delta_eit,
                ))
            })
            .collect()
    });
    let rows = rows?;

    // calibrate the coupling constant on the windows inside the validity
    // range of the dephasing-corrected 1/Delta law (well below the excited
    // linewidth), then judge those windows against the shared model; wider
    // windows are reported but carry known O(Delta/Gamma3) corrections
    let validity = config.medium.gamma3 / 6.0;
    let xs: Vec<f64> = rows
        .iter()
        .map(|(_, delta)| (1.0 - 2.0 * gamma / delta) / delta)
        .collect();
    let (xs_fit, ys_fit): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .zip(&xs)
        .filter(|((_, delta), _)| *delta <= validity)
        .map(|((r, _), &x)| (x, r.integrated_phase_rad_s))
        .unzip();
    anyhow::ensure!(
        xs_fit.len() >= 2,
        "too few windows below the validity bound for the coupling fit"
    );
    let (c, r2) = eitxpm::math::fit_proportional(&xs_fit, &ys_fit);

    let mut out_rows = Vec::new();
    let mut worst_shape: f64 = 0.0;
    let mut worst_dev: f64 = 0.0;
    for ((mut row, delta), &x) in rows.into_iter().zip(&xs) {
        let model = c * x;
        row.integrated_dev_rel = (row.integrated_phase_rad_s - model).abs() / model.abs();
        worst_shape = worst_shape.max(row.shape_rms_rel);
        if delta <= validity {
            worst_dev = worst_dev.max(row.integrated_dev_rel);
        }
        out_rows.push(row);
    }
    let rises: Vec<f64> = out_rows.iter().map(|r| r.rise_s).collect();
    let rise_mean = rises.iter().sum::<f64>() / rises.len() as f64;
    let rise_spread = (rises.iter().cloned().fold(f64::MIN, f64::max)
        - rises.iter().cloned().fold(f64::MAX, f64::min))
        / rise_mean;

    Ok(CrossCheckReport {
        rows: out_rows,
        coupling_const: c,
        r_squared: r2,
        worst_shape_rms_rel: worst_shape,
        worst_integrated_dev_rel: worst_dev,
        rise_spread_rel: rise_spread,
        passed: worst_shape <= 0.10 && worst_dev <= 0.10,
    })
}

fn run_cross_check(config: &ScenarioConfig, out_dir: &Path) -> anyhow::Result<RunReport> {
    let report = cross_check(config)?;
    let provenance = Provenance::for_config(config);

    let path = out_dir.join("validation.csv");
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&path)?;
        for line in provenance.comment_lines() {
            writeln!(f, "# {line}")?;
        }
        writeln!(
            f,
            "window_fwhm_hz,shape_rms_rel,integrated_phase_rad_s,integrated_dev_rel,rise_s,fall_s,eq2_fall_s"
        )?;
        for r in &report.rows {
            writeln!(
                f,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.window_fwhm_hz,
                r.shape_rms_rel,
                r.integrated_phase_rad_s,
                r.integrated_dev_rel,
                r.rise_s,
                r.fall_s,
                r.eq2_fall_s
            )?;
        }
    }
    let doc = serde_json::json!({
        "config": config,
        "provenance": provenance,
        "report": report,
    });
    std::fs::write(
        out_dir.join("validation.json"),
        serde_json::to_string_pretty(&doc)?,
    )?;

    let validity = config.medium.gamma3 / 6.0;
    for r in &report.rows {
        let in_validity = eitxpm::units::to_angular(r.window_fwhm_hz) <= validity;
        println!(
            "window {:7.2} kHz: shape rms {:5.2}% (<10%), integrated dev {:5.2}% {}, \
             rise {:6.1} ns, fall {:7.1} ns (eq2 {:7.1} ns)",
            r.window_fwhm_hz / 1e3,
            100.0 * r.shape_rms_rel,
            100.0 * r.integrated_dev_rel,
            if in_validity { "(<10%)" } else { "(info)" },
            r.rise_s * 1e9,
            r.fall_s * 1e9,
            r.eq2_fall_s * 1e9,
        );
    }
    println!(
        "integrated-phase law fit: C = {:.4e} rad s (rad/s), R^2 = {:.5}",
        report.coupling_const, report.r_squared
    );
    println!(
        "cross-check {}",
        if report.passed { "PASSED" } else { "FAILED" }
    );

    Ok(RunReport {
        out_dir: out_dir.to_path_buf(),
        n_points: report.rows.len(),
        n_failed: if report.passed { 0 } else { 1 },
    })
}
