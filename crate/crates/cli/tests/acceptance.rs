//! Acceptance suite: one test per quantitative criterion, each printing a
//! single PASS/FAIL line (run with `--nocapture` to see them all).

use std::sync::Mutex;
use std::time::Instant;

// the timed and thread-pool-hungry criteria run one at a time so that
// wall-clock budgets are not distorted by sibling tests
static HEAVY: Mutex<()> = Mutex::new(());

use eitxpm::bloch::{self, DensityMatrix4, PulsedDrive};
use eitxpm::detection::{self, DetectionParams};
use eitxpm::fit;
use eitxpm::lti::{self, LtiKernel};
use eitxpm::spectroscopy;
use eitxpm::trace::PhaseTrace;
use eitxpm::types::{gaussian_flux, FieldParams, MediumParams, SignalPulse, SpectralWindow, TimeGrid};
use eitxpm::units::{photon_number, signal_bandwidth, to_angular};
use eitxpm_cli::config::{preset, ScenarioConfig};
use eitxpm_cli::runner;

fn reference_medium(d0: f64) -> MediumParams {
    MediumParams::rb_d2(d0) // gamma3 = gamma4 = 2pi x 6.07 MHz, gamma = 2pi x 75 kHz
}

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} -- {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion} failed: {detail}");
}

/// Brute-force trapezoid convolution of the Gaussian flux with the
/// exponential kernel; independent of every library convolution path.
fn oracle_convolution(t: f64, kernel: &LtiKernel, pulse: &SignalPulse, dt: f64) -> f64 {
    // integrate only where both flux and kernel are non-negligible
    let s_lo = (pulse.t0 - 8.5 * pulse.tau_s).max(t - 40.0 * kernel.tau);
    let s_hi = (pulse.t0 + 8.5 * pulse.tau_s).min(t);
    if s_hi <= s_lo {
        return 0.0;
    }
    let n = ((s_hi - s_lo) / dt).ceil() as usize;
    let h = (s_hi - s_lo) / n as f64;
    let f = |s: f64| {
        gaussian_flux(s, pulse) * kernel.phi0 / kernel.tau * (-(t - s) / kernel.tau).exp()
    };
    let mut acc = 0.5 * (f(s_lo) + f(s_hi));
    for j in 1..n {
        acc += f(s_lo + h * j as f64);
    }
    acc * h
}

#[test]
fn criterion_01_closed_form_matches_brute_force_convolution() {
    let _gate = HEAVY.lock().unwrap();
    let started = Instant::now();
    let pulse = SignalPulse::from_photons(40e-9, 2.95e5, 0.0);
    let mut worst: f64 = 0.0;
    for ratio in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
        let tau = ratio * pulse.tau_s;
        let kernel = LtiKernel::new(3e-13, tau).unwrap();
        let dt = (pulse.tau_s.min(tau)) / 800.0;
        let lo = pulse.t0 - 6.0 * pulse.tau_s;
        let hi = pulse.t0 + 6.0 * pulse.tau_s + 10.0 * tau;
        let peak = (0..400)
            .map(|k| lti::phase_profile(lo + (hi - lo) * k as f64 / 399.0, &kernel, &pulse))
            .fold(0.0_f64, f64::max);
        for k in 0..250 {
            let t = lo + (hi - lo) * k as f64 / 249.0;
            let closed = lti::phase_profile(t, &kernel, &pulse);
            let brute = oracle_convolution(t, &kernel, &pulse, dt);
            worst = worst.max((closed - brute).abs() / peak);
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "1 (closed form vs convolution)",
        worst < 1e-6 && elapsed < 1.0,
        &format!("max relative error {worst:.2e} (<1e-6), runtime {elapsed:.2} s (<1 s)"),
    );
}

#[test]
fn criterion_02_response_time_reproduces_measured_decays() {
    let tau_a = lti::response_time(
        SpectralWindow::from_fwhm_hz(0.38e6).unwrap(),
        &reference_medium(3.0),
    )
    .unwrap();
    let tau_b = lti::response_time(
        SpectralWindow::from_fwhm_hz(600e3).unwrap(),
        &reference_medium(1.8),
    )
    .unwrap();
    let ok_a = (tau_a - 1.217_910_06e-6).abs() / 1.217_910_06e-6 < 1e-6
        && (tau_a - 1.1e-6).abs() / 1.1e-6 < 0.15;
    // roughly half the quoted 1200 ns decay of the higher-power data set
    let ok_b = (tau_b - 7.095_657_9e-7).abs() / 7.095_657_9e-7 < 1e-6
        && tau_b / 1.2e-6 > 0.4
        && tau_b / 1.2e-6 < 0.7;
    report(
        "2 (response-time formula)",
        ok_a && ok_b,
        &format!(
            "tau(0.38 MHz, d0=3) = {:.3} us vs measured 1.1 us; tau(600 kHz, d0=1.8) = {:.3} us",
            tau_a * 1e6,
            tau_b * 1e6
        ),
    );
}

#[test]
fn criterion_03_integrated_phase_peaks_at_four_gamma() {
    let medium = reference_medium(3.0);
    let gamma = medium.gamma;
    let n = 4000;
    let lo = 2.05 * gamma;
    let hi = 30.0 * gamma;
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_delta = 0.0;
    for k in 0..n {
        let delta = lo + step * k as f64;
        let v = lti::integrated_phase_per_photon(
            SpectralWindow::new(delta).unwrap(),
            &medium,
            1.0,
        );
        if v > best {
            best = v;
            best_delta = delta;
        }
    }
    let dev = (best_delta - 4.0 * gamma).abs();
    report(
        "3 (optimum window at 4*gamma)",
        dev <= step,
        &format!(
            "argmax at {:.4}*gamma, grid step {:.4}*gamma",
            best_delta / gamma,
            step / gamma
        ),
    );
}

#[test]
fn criterion_04_order_of_magnitude_scaling() {
    // Coupling powers in the emulated experiment span 192 nW to 5 uW, a
    // factor of 26; with
    // the window tracking the coupling power, the measured windows ran from
    // 0.38 MHz to roughly 9.9 MHz. A ten-fold narrowing inside that range
    // (9.9 -> 0.99 MHz) probes the regime the order-of-magnitude claim
    // describes, with the dephasing correction active but not dominant.
    let medium = reference_medium(3.0);
    let pulse = SignalPulse::from_photons(40e-9, 2.95e5, 0.0);
    let narrow = SpectralWindow::from_fwhm_hz(0.99e6).unwrap();
    let wide = SpectralWindow::from_fwhm_hz(9.9e6).unwrap();
    let s_narrow = lti::summarize(
        &LtiKernel::for_window(narrow, &medium, 1e-6).unwrap(),
        &pulse,
    )
    .unwrap();
    let s_wide = lti::summarize(
        &LtiKernel::for_window(wide, &medium, 1e-6).unwrap(),
        &pulse,
    )
    .unwrap();
    let int_ratio = s_narrow.integrated_phase / s_wide.integrated_phase;
    let peak_ratio = s_narrow.peak_phase / s_wide.peak_phase;

    // at the dephasing-limited edge of the range the same narrowing gains
    // visibly less than ten-fold
    let edge_narrow = SpectralWindow::from_fwhm_hz(0.38e6).unwrap();
    let edge_wide = SpectralWindow::from_fwhm_hz(3.8e6).unwrap();
    let edge_ratio = lti::integrated_phase_per_photon(edge_narrow, &medium, 1.0)
        / lti::integrated_phase_per_photon(edge_wide, &medium, 1.0);

    report(
        "4 (order-of-magnitude scaling)",
        (8.0..=10.0).contains(&int_ratio) && peak_ratio <= 2.5 && edge_ratio < 8.0,
        &format!(
            "integrated ratio {int_ratio:.2} (need 8-10), peak ratio {peak_ratio:.2} (need <=2.5); \
             near the dephasing limit the same narrowing yields only {edge_ratio:.2}"
        ),
    );
}

fn run_preset_quick(name: &str, shots: usize, seed: u64, dir: &str) -> Vec<eitxpm_cli::export::ResultRow> {
    let mut cfg: ScenarioConfig = preset(name).unwrap();
    cfg.detection.n_shots = shots;
    cfg.seed = seed;
    let out = std::env::temp_dir().join(format!("eitxpm-acceptance-{dir}"));
    let _ = std::fs::remove_dir_all(&out);
    let report = runner::run_scenario(&cfg, &out).unwrap();
    assert_eq!(report.n_failed, 0, "{name} sweep had failing points");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    serde_json::from_value(doc["rows"].clone()).unwrap()
}

#[test]
fn criterion_05_rise_fall_decoupling() {
    let _gate = HEAVY.lock().unwrap();
    // window sweep at fixed pulse duration
    let rows4 = run_preset_quick("fig4", 2500, 11, "c5-fig4");
    let rises: Vec<f64> = rows4.iter().map(|r| r.rise_s).collect();
    let rise_mean = rises.iter().sum::<f64>() / rises.len() as f64;
    let rise_spread = (rises.iter().cloned().fold(f64::MIN, f64::max)
        - rises.iter().cloned().fold(f64::MAX, f64::min))
        / rise_mean;
    let fall_dev = rows4
        .iter()
        .map(|r| (r.fall_s - r.eq2_fall_s).abs() / r.eq2_fall_s)
        .fold(0.0_f64, f64::max);

    // duration sweep at a fixed window
    let rows5 = run_preset_quick("fig5", 2500, 12, "c5-fig5");
    let long: Vec<&eitxpm_cli::export::ResultRow> = rows5
        .iter()
        .filter(|r| r.tau_s_pulse_s >= 100e-9)
        .collect();
    let slope = {
        let (x0, y0) = (long[0].tau_s_pulse_s, long[0].rise_s);
        let (x1, y1) = (long[long.len() - 1].tau_s_pulse_s, long[long.len() - 1].rise_s);
        (y1 - y0) / (x1 - x0)
    };
    let falls: Vec<f64> = rows5.iter().map(|r| r.fall_s).collect();
    let fall_mean = falls.iter().sum::<f64>() / falls.len() as f64;
    let fall_spread = (falls.iter().cloned().fold(f64::MIN, f64::max)
        - falls.iter().cloned().fold(f64::MAX, f64::min))
        / fall_mean;

    report(
        "5 (rise/fall decoupling)",
        rise_spread < 0.20 && fall_dev < 0.25 && (slope - 1.0).abs() < 0.15 && fall_spread < 0.20,
        &format!(
            "window sweep: rise spread {:.1}% (<20%), worst fall dev vs formula {:.1}% (<25%); \
             duration sweep: rise slope {slope:.3} (1 +- 0.15), fall spread {:.1}% (<20%)",
            100.0 * rise_spread,
            100.0 * fall_dev,
            100.0 * fall_spread
        ),
    );
}

#[test]
fn criterion_06_photon_bookkeeping() {
    let n = photon_number(75e-15, 780.24e-9).unwrap();
    let bw = signal_bandwidth(40e-9).unwrap();
    report(
        "6 (photon bookkeeping)",
        (2.8e5..=3.1e5).contains(&n) && (1.8e6..=2.2e6).contains(&bw),
        &format!("75 fJ -> {n:.3e} photons (2.8e5..3.1e5); 40 ns -> {:.2} MHz (1.8..2.2)", bw / 1e6),
    );
}

#[test]
fn criterion_07_sampling_smear_on_rise_time() {
    // 140 ns (RMS) profile through the beat-note chain with 67 ns bins
    let grid = TimeGrid::spanning(-1.2e-6, 6e-6, 1e-9).unwrap();
    let phase: Vec<f64> = grid
        .times()
        .map(|t| 5.6e-8 * lti::unit_phase_shape(t, 140e-9, 0.829e-6))
        .collect();
    let trace = PhaseTrace::new(grid, phase).unwrap();
    let params = DetectionParams {
        n_shots: 1,
        atom_fluct_rms: 0.0,
        detector_noise_rms: 0.0,
        ..Default::default()
    };
    let binned = detection::run_shots(&trace, None, &params, 1).unwrap();
    let fitted = fit::fit_phase_profile(&binned, None, None).unwrap();
    let rise_ns = fitted.tau_s * 1e9;
    report(
        "7 (sampling smear)",
        fitted.converged && (140.0..=180.0).contains(&rise_ns),
        &format!("fitted rise {rise_ns:.1} ns for a 140 ns pulse (need 140-180 ns)"),
    );
}

#[test]
fn criterion_08_bloch_engine_physics_suite() {
    let mut detail = String::new();
    let mut all_ok = true;

    // invariants along a pulsed evolution
    let medium = reference_medium(1.0);
    let fields = FieldParams {
        omega_p: to_angular(50e3),
        omega_c: to_angular(2e6),
        delta_p: 0.0,
        delta_2ph: 0.0,
        delta_s: to_angular(40e6),
    };
    let initial = bloch::steady_state(&medium, &fields, 0.0).unwrap();
    let drive = PulsedDrive::new(to_angular(3e6), 40e-9, 0.5e-6).unwrap();
    let grid = TimeGrid::spanning(0.0, 3e-6, 0.05 / fields.delta_s).unwrap();
    let trace = bloch::evolve(&medium, &fields, &drive, grid, &initial).unwrap();
    let inv_ok = trace.report.max_trace_dev < 1e-8
        && trace.report.max_herm_defect < 1e-10
        && trace.report.min_eigenvalue > -1e-9;
    all_ok &= inv_ok;
    detail.push_str(&format!(
        "invariants {} (trace dev {:.1e}, herm {:.1e}, min eig {:.1e}); ",
        if inv_ok { "ok" } else { "BAD" },
        trace.report.max_trace_dev,
        trace.report.max_herm_defect,
        trace.report.min_eigenvalue
    ));

    // two-level limit against the exact driven-atom coherence
    let mut closed = reference_medium(1.0);
    closed.branch3 = 1.0;
    let omega = to_angular(0.3e6);
    let bare = FieldParams {
        omega_p: omega,
        omega_c: 0.0,
        delta_p: 0.0,
        delta_2ph: 0.0,
        delta_s: 0.0,
    };
    let rho = bloch::steady_state(&closed, &bare, 0.0).unwrap();
    let denom = closed.gamma3 * closed.gamma3 / 4.0 + omega * omega / 2.0;
    let expect = -omega / 2.0 * (closed.gamma3 / 2.0) / denom;
    let two_level_ok = (rho.get(2, 0).im - expect).abs() < 1e-9 * expect.abs();
    all_ok &= two_level_ok;
    detail.push_str(&format!(
        "two-level limit {}; ",
        if two_level_ok { "ok" } else { "BAD" }
    ));

    // perfect EIT dark state
    let mut dephasing_free = reference_medium(3.0);
    dephasing_free.gamma = 0.0;
    let eit = FieldParams {
        omega_p: to_angular(0.1e6),
        omega_c: to_angular(3e6),
        delta_p: 0.0,
        delta_2ph: 0.0,
        delta_s: 0.0,
    };
    let rho_eit = bloch::steady_state(&dephasing_free, &eit, 0.0).unwrap();
    let two_level_scale = eit.omega_p / dephasing_free.gamma3;
    let eit_ok = rho_eit.get(2, 0).norm() < 1e-6 * two_level_scale;
    all_ok &= eit_ok;
    detail.push_str(&format!("dark state {}; ", if eit_ok { "ok" } else { "BAD" }));

    // AC Stark shift against the dispersive formula
    let stark_medium = reference_medium(1.0);
    let mut stark_fields = FieldParams {
        omega_p: to_angular(120e3),
        omega_c: to_angular(3e6),
        delta_p: 0.0,
        delta_2ph: 0.0,
        delta_s: to_angular(40e6),
    };
    stark_fields.delta_s = to_angular(40e6);
    let omega_s = to_angular(2e6);
    let shift = spectroscopy::stark_shift(&stark_medium, &stark_fields, omega_s).unwrap();
    let textbook = omega_s * omega_s / (4.0 * stark_fields.delta_s);
    let stark_ok = (shift - textbook).abs() / textbook < 0.10;
    all_ok &= stark_ok;
    detail.push_str(&format!(
        "AC Stark {:.1}% of formula ({}); ",
        100.0 * shift / textbook,
        if stark_ok { "ok" } else { "BAD" }
    ));

    // steady-state versus long-time evolution
    let relax_fields = FieldParams {
        omega_p: to_angular(100e3),
        omega_c: to_angular(2e6),
        delta_p: 0.0,
        delta_2ph: 0.0,
        delta_s: 0.0,
    };
    let steady = bloch::steady_state(&medium, &relax_fields, 0.0).unwrap();
    let t_end = 10.0 / medium.gamma;
    let relax_grid = TimeGrid::spanning(0.0, t_end, 0.05 / medium.gamma3).unwrap();
    let relax = bloch::evolve(
        &medium,
        &relax_fields,
        &PulsedDrive::off(),
        relax_grid,
        &DensityMatrix4::ground(),
    )
    .unwrap();
    let consistency = (relax.rho31.last().unwrap() - steady.get(2, 0)).norm();
    let relax_ok = consistency < 1e-6;
    all_ok &= relax_ok;
    detail.push_str(&format!(
        "steady-vs-evolve {:.1e} ({})",
        consistency,
        if relax_ok { "ok" } else { "BAD" }
    ));

    report("8 (master-equation physics suite)", all_ok, &detail);
}

#[test]
fn criterion_09_lti_validity_across_window_grid() {
    let _gate = HEAVY.lock().unwrap();
    let started = Instant::now();
    let cfg = preset("validation-lti-vs-bloch").unwrap();
    let check = runner::cross_check(&cfg).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let shape_ok = check.worst_shape_rms_rel <= 0.10;
    let agreement_ok = check.worst_integrated_dev_rel <= 0.10;
    report(
        "9 (LTI validity)",
        shape_ok && agreement_ok && elapsed < 600.0,
        &format!(
            "worst shape rms {:.2}% of peak (<10%), worst integrated-phase deviation {:.2}% \
             (<10%, within the narrow-window validity range), runtime {elapsed:.1} s (<600 s)",
            100.0 * check.worst_shape_rms_rel,
            100.0 * check.worst_integrated_dev_rel
        ),
    );
}

#[test]
fn criterion_10_fitter_round_trip() {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    let truth = (5.6e-8, 40e-9, 1.1e-6, 0.0, 0.0);
    let grid = TimeGrid::new(-0.7e-6, 67e-9, 110).unwrap();
    let clean: Vec<f64> = grid
        .times()
        .map(|t| truth.0 * lti::unit_phase_shape(t - truth.3, truth.1, truth.2))
        .collect();
    let clean_trace = PhaseTrace::new(grid, clean.clone()).unwrap();
    let noiseless = fit::fit_phase_profile(&clean_trace, None, None).unwrap();
    let noiseless_ok = (noiseless.amplitude - truth.0).abs() / truth.0 < 1e-3
        && (noiseless.tau_s - truth.1).abs() / truth.1 < 1e-3
        && (noiseless.tau - truth.2).abs() / truth.2 < 1e-3;

    let peak = clean_trace.max_phase();
    let sigma = 0.05 * peak / (2500.0_f64).sqrt();
    let mut worst_tau_s: f64 = 0.0;
    let mut worst_tau: f64 = 0.0;
    for seed in 0..100u64 {
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<f64> = clean.iter().map(|p| p + normal.sample(&mut rng)).collect();
        let trace = PhaseTrace::new(grid, noisy).unwrap();
        let fitted = fit::fit_phase_profile(&trace, None, None).unwrap();
        worst_tau_s = worst_tau_s.max((fitted.tau_s - truth.1).abs() / truth.1);
        worst_tau = worst_tau.max((fitted.tau - truth.2).abs() / truth.2);
    }
    report(
        "10 (fitter round trip)",
        noiseless_ok && worst_tau_s < 0.05 && worst_tau < 0.05,
        &format!(
            "noiseless recovery <0.1%: {}; worst over 100 noisy seeds: tau_s {:.2}%, tau {:.2}% (<5%)",
            noiseless_ok,
            100.0 * worst_tau_s,
            100.0 * worst_tau
        ),
    );
}

#[test]
fn criterion_11_deterministic_outputs() {
    let _gate = HEAVY.lock().unwrap();
    let mut cfg = preset("fig2").unwrap();
    cfg.detection.n_shots = 150;
    cfg.seed = 3;
    let dir_a = std::env::temp_dir().join("eitxpm-acceptance-det-a");
    let dir_b = std::env::temp_dir().join("eitxpm-acceptance-det-b");
    let _ = std::fs::remove_dir_all(&dir_a);
    let _ = std::fs::remove_dir_all(&dir_b);
    let rep_a = runner::run_scenario(&cfg, &dir_a).unwrap();
    let rep_b = runner::run_scenario(&cfg, &dir_b).unwrap();
    assert_eq!(rep_a.n_failed, 0);
    assert_eq!(rep_b.n_failed, 0);

    let mut names: Vec<String> = std::fs::read_dir(&dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut identical = true;
    for name in &names {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        if a != b {
            identical = false;
        }
    }
    report(
        "11 (deterministic outputs)",
        identical && !names.is_empty(),
        &format!("{} output files byte-identical across reruns", names.len()),
    );
}
