//! Rotating-frame Hamiltonian, Lindblad dissipator and the steady-state
//! linear solve for the four-level N-scheme.
//!
//! Frame: |1⟩ is the energy reference; |2⟩ rotates with the Raman (probe −
//! coupling) frequency, |3⟩ with the probe, |4⟩ with Raman + signal. Decay
//! channels are |3⟩ → {|1⟩, |2⟩} split by the branching fraction, |4⟩ → |2⟩
//! (closed signal transition), plus pure dephasing of |2⟩ at the
//! ground-coherence rate γ.

use num_complex::Complex64 as C64;

use super::matrix::DensityMatrix4;
use crate::error::{Error, Result};
use crate::types::{FieldParams, MediumParams};

/// Instantaneous complex Rabi amplitudes of the three drive fields.
#[derive(Debug, Clone, Copy)]
pub struct RabiAmplitudes {
    pub omega_p: C64,
    pub omega_c: C64,
    pub omega_s: C64,
}

/// Hamiltonian (divided by ħ) for given drive amplitudes and detunings.
///
/// The drive phase attaches to the lowering component, ⟨g|H|e⟩ = Ω/2, so
/// the ground–excited coherence ρ_ge tracks the drive envelope directly and
/// the re-radiated field stays phase-covariant for complex envelopes.
pub fn hamiltonian(fields: &FieldParams, rabi: &RabiAmplitudes) -> [[C64; 4]; 4] {
    let mut h = [[C64::new(0.0, 0.0); 4]; 4];
    h[1][1] = C64::new(-fields.delta_2ph, 0.0);
    h[2][2] = C64::new(-fields.delta_p, 0.0);
    h[3][3] = C64::new(-(fields.delta_2ph + fields.delta_s), 0.0);
    h[0][2] = 0.5 * rabi.omega_p;
    h[2][0] = h[0][2].conj();
    h[1][2] = 0.5 * rabi.omega_c;
    h[2][1] = h[1][2].conj();
    h[1][3] = 0.5 * rabi.omega_s;
    h[3][1] = h[1][3].conj();
    h
}

/// Master-equation right-hand side: −i[H, ρ] plus the dissipator.
pub fn rhs(medium: &MediumParams, h: &[[C64; 4]; 4], rho: &[[C64; 4]; 4]) -> [[C64; 4]; 4] {
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];

    // unitary part
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..4 {
                acc += h[i][k] * rho[k][j] - rho[i][k] * h[k][j];
            }
            out[i][j] = C64::new(acc.im, -acc.re); // multiply by -i
        }
    }

    // population-transfer channels (target, source, rate)
    let channels = [
        (0usize, 2usize, medium.branch3 * medium.gamma3),
        (1, 2, (1.0 - medium.branch3) * medium.gamma3),
        (1, 3, medium.gamma4),
    ];
    // total decay rate out of each level
    let mut gamma_out = [0.0_f64; 4];
    gamma_out[2] = medium.gamma3;
    gamma_out[3] = medium.gamma4;

    for &(a, b, rate) in &channels {
        out[a][a] += C64::new(rate, 0.0) * rho[b][b];
    }
    for i in 0..4 {
        for j in 0..4 {
            let damp = 0.5 * (gamma_out[i] + gamma_out[j]);
            if damp != 0.0 {
                out[i][j] -= damp * rho[i][j];
            }
        }
    }

    // pure dephasing of |2⟩ (index 1) against everything else
    if medium.gamma != 0.0 {
        for j in 0..4 {
            if j != 1 {
                out[1][j] -= medium.gamma * rho[1][j];
                out[j][1] -= medium.gamma * rho[j][1];
            }
        }
    }

    out
}

/// Unique physical steady state: solves L(ρ) = 0 with the trace constraint
/// substituted for the ρ₁₁ equation.
pub fn steady_state_for(
    medium: &MediumParams,
    fields: &FieldParams,
    rabi: &RabiAmplitudes,
) -> Result<DensityMatrix4> {
    medium.validate()?;
    fields.validate()?;
    let h = hamiltonian(fields, rabi);

    // build the 16x16 Liouvillian matrix column by column
    let mut a = [[C64::new(0.0, 0.0); 16]; 16];
    for k in 0..4 {
        for l in 0..4 {
            let mut basis = [[C64::new(0.0, 0.0); 4]; 4];
            basis[k][l] = C64::new(1.0, 0.0);
            let image = rhs(medium, &h, &basis);
            let col = 4 * k + l;
            for i in 0..4 {
                for j in 0..4 {
                    a[4 * i + j][col] = image[i][j];
                }
            }
        }
    }

    // trace constraint replaces the rho_11 row
    let mut b = [C64::new(0.0, 0.0); 16];
    for col in 0..16 {
        a[0][col] = C64::new(0.0, 0.0);
    }
    for i in 0..4 {
        a[0][4 * i + i] = C64::new(1.0, 0.0);
    }
    b[0] = C64::new(1.0, 0.0);

    // With the coupling off and a closed probe cycle, |2⟩ (and with it |4⟩)
    // is disconnected: population parked there is conserved and the
    // nullspace becomes degenerate. The physical sector for this bare-probe
    // configuration keeps all population in the {|1⟩, |3⟩} pair, so pin the
    // decoupled rows to zero.
    if rabi.omega_c.norm() == 0.0 && medium.branch3 == 1.0 && rabi.omega_s.norm() == 0.0 {
        for i in 0..4 {
            for j in 0..4 {
                if i == 1 || i == 3 || j == 1 || j == 3 {
                    let row = 4 * i + j;
                    for col in 0..16 {
                        a[row][col] = C64::new(0.0, 0.0);
                    }
                    a[row][row] = C64::new(1.0, 0.0);
                    b[row] = C64::new(0.0, 0.0);
                }
            }
        }
    }

    let x = solve_complex_16(&mut a, &mut b)?;

    let mut rho = DensityMatrix4::zero();
    for i in 0..4 {
        for j in 0..4 {
            rho.0[i][j] = x[4 * i + j];
        }
    }
    rho.symmetrize();
    Ok(rho)
}

// Gaussian elimination with partial pivoting; the pivot-magnitude spread
// stands in for a condition estimate.
fn solve_complex_16(a: &mut [[C64; 16]; 16], b: &mut [C64; 16]) -> Result<[C64; 16]> {
    const N: usize = 16;
    let mut max_pivot = 0.0_f64;
    let mut min_pivot = f64::INFINITY;

    for col in 0..N {
        let mut pivot_row = col;
        let mut pivot_mag = a[col][col].norm();
        for row in (col + 1)..N {
            let mag = a[row][col].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        max_pivot = max_pivot.max(pivot_mag);
        min_pivot = min_pivot.min(pivot_mag);
        if pivot_mag == 0.0 || (max_pivot > 0.0 && pivot_mag < 1e-14 * max_pivot) {
            return Err(Error::Solver {
                reason: "singular or near-singular Liouvillian".into(),
                condition: if pivot_mag > 0.0 {
                    max_pivot / pivot_mag
                } else {
                    f64::INFINITY
                },
            });
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            b.swap(pivot_row, col);
        }
        let inv = C64::new(1.0, 0.0) / a[col][col];
        for row in (col + 1)..N {
            let factor = a[row][col] * inv;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for k in col..N {
                let sub = factor * a[col][k];
                a[row][k] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
        }
    }

    let _condition = max_pivot / min_pivot;
    let mut x = [C64::new(0.0, 0.0); 16];
    for col in (0..N).rev() {
        let mut acc = b[col];
        for k in (col + 1)..N {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::to_angular;

    fn closed_two_level(d0: f64) -> MediumParams {
        let mut m = MediumParams::rb_d2(d0);
        m.branch3 = 1.0; // cycling transition for the bare-probe configuration
        m
    }

    fn no_signal(omega_p: f64, omega_c: f64, delta_p: f64, delta_2ph: f64) -> (FieldParams, RabiAmplitudes) {
        let fields = FieldParams {
            omega_p,
            omega_c,
            delta_p,
            delta_2ph,
            delta_s: 0.0,
        };
        let rabi = RabiAmplitudes {
            omega_p: C64::new(omega_p, 0.0),
            omega_c: C64::new(omega_c, 0.0),
            omega_s: C64::new(0.0, 0.0),
        };
        (fields, rabi)
    }

    /// Exact steady-state coherence of the driven two-level system,
    /// ρ_eg = −i(Ω/2)(Γ/2 + iδ)/(δ² + Γ²/4 + Ω²/2).
    fn two_level_coherence(omega: f64, delta: f64, gamma: f64) -> C64 {
        let denom = delta * delta + gamma * gamma / 4.0 + omega * omega / 2.0;
        C64::new(0.0, -omega / 2.0) * C64::new(gamma / 2.0, delta) / denom
    }

    #[test]
    fn two_level_limit_on_resonance() {
        let m = closed_two_level(3.0);
        let omega_p = to_angular(0.3e6);
        let (fields, rabi) = no_signal(omega_p, 0.0, 0.0, 0.0);
        let rho = steady_state_for(&m, &fields, &rabi).unwrap();
        let expect = two_level_coherence(omega_p, 0.0, m.gamma3);
        let got = rho.get(2, 0);
        assert!(
            (got - expect).norm() < 1e-10 * expect.norm(),
            "got {got}, expect {expect}"
        );
        // absorptive on resonance: negative imaginary part, no real part
        assert!(got.im < 0.0 && got.re.abs() < 1e-12 * got.im.abs());
    }

    #[test]
    fn two_level_limit_detuned_and_saturated() {
        let m = closed_two_level(1.0);
        for (omega_hz, delta_hz) in [(0.5e6, 2e6), (4e6, -3e6), (8e6, 0.5e6)] {
            let omega = to_angular(omega_hz);
            let delta = to_angular(delta_hz);
            let (fields, rabi) = no_signal(omega, 0.0, delta, delta);
            let rho = steady_state_for(&m, &fields, &rabi).unwrap();
            let expect = two_level_coherence(omega, delta, m.gamma3);
            let got = rho.get(2, 0);
            assert!(
                (got - expect).norm() < 1e-9 * expect.norm(),
                "omega {omega_hz:e} delta {delta_hz:e}: got {got}, expect {expect}"
            );
        }
    }

    #[test]
    fn perfect_eit_dark_state() {
        let mut m = MediumParams::rb_d2(3.0);
        m.gamma = 0.0;
        let omega_p = to_angular(0.1e6);
        let omega_c = to_angular(3e6);
        let (fields, rabi) = no_signal(omega_p, omega_c, 0.0, 0.0);
        let rho = steady_state_for(&m, &fields, &rabi).unwrap();
        let two_level = two_level_coherence(omega_p, 0.0, m.gamma3).norm();
        assert!(
            rho.get(2, 0).norm() < 1e-6 * two_level,
            "residual coherence {:e}",
            rho.get(2, 0).norm()
        );
        // dark state: population ratio rho_22/rho_11 = (omega_p/omega_c)^2
        let ratio = rho.get(1, 1).re / rho.get(0, 0).re;
        let expect = (omega_p / omega_c).powi(2);
        assert!((ratio - expect).abs() < 1e-6, "ratio {ratio:e} vs {expect:e}");
    }

    #[test]
    fn lambda_dephasing_scaling_of_residual_absorption() {
        // residual Im(rho_31)/omega_p at line centre against the analytic
        // weak-probe Lambda susceptibility (gamma/2)/(gamma*Gamma3/2 + omega_c^2/4)
        let omega_p = to_angular(20e3);
        let omega_c = to_angular(2e6);
        let mut ratios = Vec::new();
        for k in 0..7 {
            let gamma = to_angular(10e3) * 10.0_f64.powf(k as f64 / 6.0);
            let mut m = MediumParams::rb_d2(3.0);
            m.gamma = gamma;
            let (fields, rabi) = no_signal(omega_p, omega_c, 0.0, 0.0);
            let rho = steady_state_for(&m, &fields, &rabi).unwrap();
            let engine = -rho.get(2, 0).im / omega_p;
            let analytic =
                (gamma / 2.0) / (gamma * m.gamma3 / 2.0 + omega_c * omega_c / 4.0);
            ratios.push(engine / analytic);
        }
        for r in &ratios {
            assert!((r - 1.0).abs() < 0.05, "engine/analytic = {r}");
        }
    }

    #[test]
    fn trace_row_substitution_keeps_unit_trace() {
        let m = MediumParams::rb_d2(2.0);
        let (fields, rabi) = no_signal(to_angular(0.2e6), to_angular(1.5e6), 0.0, 1e5);
        let rho = steady_state_for(&m, &fields, &rabi).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!(rho.hermiticity_defect() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn rhs_conserves_trace_and_hermiticity() {
        let m = MediumParams::rb_d2(3.0);
        let fields = FieldParams {
            omega_p: 1e5,
            omega_c: 1e6,
            delta_p: 3e5,
            delta_2ph: -2e5,
            delta_s: 2.5e8,
        };
        let rabi = RabiAmplitudes {
            omega_p: C64::new(1e5, 3e4),
            omega_c: C64::new(1e6, -2e5),
            omega_s: C64::new(5e6, 0.0),
        };
        let h = hamiltonian(&fields, &rabi);
        // random-ish Hermitian trial state
        let mut rho = DensityMatrix4::zero();
        for i in 0..4 {
            rho.0[i][i] = C64::new(0.25, 0.0);
        }
        rho.0[0][1] = C64::new(0.1, 0.05);
        rho.0[1][0] = rho.0[0][1].conj();
        rho.0[2][3] = C64::new(-0.03, 0.08);
        rho.0[3][2] = rho.0[2][3].conj();
        let d = rhs(&m, &h, &rho.0);
        let trace: C64 = d[0][0] + d[1][1] + d[2][2] + d[3][3];
        assert!(trace.norm() < 1e-10);
        for i in 0..4 {
            for j in 0..4 {
                assert!((d[i][j] - d[j][i].conj()).norm() < 1e-10);
            }
        }
    }
}
