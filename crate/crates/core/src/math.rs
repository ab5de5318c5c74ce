//! Small numerical helpers shared across modules.

/// Error function.
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function e^{x²}·erfc(x) for x ≥ 0.
///
/// Uses erfc directly while it keeps precision and switches to the Laplace
/// continued fraction for large arguments where erfc underflows.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 25.0 {
        // erfc keeps full relative precision out to x ~ 26; exp(x^2) is
        // still in range there
        (x * x).exp() * libm::erfc(x)
    } else {
        // Laplace continued fraction:
        // erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut cf = 0.0;
        for k in (1..=30).rev() {
            cf = (k as f64 / 2.0) / (x + cf);
        }
        0.5 * std::f64::consts::FRAC_2_SQRT_PI / (x + cf)
    }
}

/// Trapezoid integral of uniformly sampled values.
pub fn trapz(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * (values[0] + values[values.len() - 1]) + interior)
}

/// Linear interpolation of uniformly sampled `values` at fractional index.
#[inline]
pub fn lerp_at(values: &[f64], idx: f64) -> f64 {
    if idx <= 0.0 {
        return values[0];
    }
    let max = (values.len() - 1) as f64;
    if idx >= max {
        return values[values.len() - 1];
    }
    let k = idx.floor() as usize;
    let frac = idx - k as f64;
    values[k] * (1.0 - frac) + values[k + 1] * frac
}

/// Golden-section search for the maximum of a unimodal function on [a, b].
pub fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Unwrap a phase series by nearest-multiple-of-2π continuation.
pub fn unwrap_phase(phase: &mut [f64]) {
    let tau = std::f64::consts::TAU;
    let mut offset = 0.0;
    for k in 1..phase.len() {
        let prev = phase[k - 1];
        let raw = phase[k] + offset;
        let jump = ((raw - prev) / tau).round();
        offset -= jump * tau;
        phase[k] += offset;
    }
}

/// Sample mean and standard deviation (Welford).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut count = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for &v in values {
        count += 1;
        let d = v - mean;
        mean += d / count as f64;
        m2 += d * (v - mean);
    }
    let var = if count > 1 { m2 / (count - 1) as f64 } else { 0.0 };
    (mean, var.sqrt())
}

/// Ordinary least squares y = a·x through the origin; returns (a, r²).
pub fn fit_proportional(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| xi * yi).sum();
    let sxx: f64 = x.iter().map(|xi| xi * xi).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ybar: f64 = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|yi| (yi - ybar).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - a * xi).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, r2)
}

/// Straight-line least squares y = a + b·x; returns (a, b).
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    let b = (n * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / n;
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_matches_direct_form_at_moderate_arguments() {
        for &x in &[0.0_f64, 0.5, 1.0, 4.0, 8.0, 16.0, 24.9] {
            let direct = (x * x).exp() * libm::erfc(x);
            let v = erfcx(x);
            assert!((v - direct).abs() <= 1e-13 * direct.abs().max(1e-300), "x = {x}");
        }
    }

    #[test]
    fn erfcx_asymptotic_tail() {
        // erfcx(x) -> 1/(x sqrt(pi)) for large x
        for &x in &[15.0, 30.0, 100.0, 1e4] {
            let v = erfcx(x);
            let asym = 1.0 / (x * std::f64::consts::PI.sqrt());
            assert!((v - asym).abs() / asym < 1e-2, "x = {x}, v = {v}");
            assert!(v < asym, "upper bound violated at x = {x}");
        }
    }

    #[test]
    fn erfcx_branches_agree_at_switch() {
        // evaluate both branch formulas at the same argument
        let x = 25.0_f64;
        let direct = (x * x).exp() * libm::erfc(x);
        let mut cf = 0.0;
        for k in (1..=30).rev() {
            cf = (k as f64 / 2.0) / (x + cf);
        }
        let fraction = 0.5 * std::f64::consts::FRAC_2_SQRT_PI / (x + cf);
        assert!((direct - fraction).abs() / direct < 1e-12);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let xm = golden_max(-1.0, 3.0, 1e-12, |x| -(x - 1.3) * (x - 1.3));
        assert!((xm - 1.3).abs() < 1e-9);
    }

    #[test]
    fn unwrap_continues_through_jumps() {
        let tau = std::f64::consts::TAU;
        let truth: Vec<f64> = (0..100).map(|k| 0.09 * k as f64).collect();
        let mut wrapped: Vec<f64> = truth
            .iter()
            .map(|p| {
                let mut w = p % tau;
                if w > std::f64::consts::PI {
                    w -= tau;
                }
                w
            })
            .collect();
        unwrap_phase(&mut wrapped);
        for (w, t) in wrapped.iter().zip(&truth) {
            assert!((w - t).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_std_simple() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-12);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn proportional_fit_recovers_slope() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let (a, r2) = fit_proportional(&x, &y);
        assert!((a - 2.0).abs() < 1e-12);
        assert!(r2 > 0.999_999);
    }
}

