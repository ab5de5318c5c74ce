//! 4×4 complex Hermitian density matrix with invariant diagnostics.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Density matrix over the basis {|1⟩, |2⟩ ground; |3⟩, |4⟩ excited}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix4(pub [[C64; 4]; 4]);

impl DensityMatrix4 {
    pub fn zero() -> Self {
        DensityMatrix4([[C64::new(0.0, 0.0); 4]; 4])
    }

    /// All population in the ground state |1⟩.
    pub fn ground() -> Self {
        let mut m = Self::zero();
        m.0[0][0] = C64::new(1.0, 0.0);
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2] + self.0[3][3]
    }

    /// Largest deviation from Hermitian symmetry, max |ρ_ij − ρ_ji*|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in i..4 {
                let d = (self.0[i][j] - self.0[j][i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Replace by the Hermitian part (ρ + ρ†)/2.
    pub fn symmetrize(&mut self) {
        for i in 0..4 {
            self.0[i][i] = C64::new(self.0[i][i].re, 0.0);
            for j in (i + 1)..4 {
                let avg = 0.5 * (self.0[i][j] + self.0[j][i].conj());
                self.0[i][j] = avg;
                self.0[j][i] = avg.conj();
            }
        }
    }

    /// Eigenvalues in ascending order.
    ///
    /// The Hermitian matrix X + iY embeds into the real symmetric matrix
    /// [[X, −Y], [Y, X]] whose spectrum doubles each eigenvalue; a cyclic
    /// Jacobi pass on the 8×8 embedding then yields the four values.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut a = [[0.0_f64; 8]; 8];
        for i in 0..4 {
            for j in 0..4 {
                let z = self.0[i][j];
                a[i][j] = z.re;
                a[i + 4][j + 4] = z.re;
                a[i][j + 4] = -z.im;
                a[i + 4][j] = z.im;
            }
        }
        let mut evs = jacobi_eigenvalues_sym8(&mut a);
        evs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        [evs[0], evs[2], evs[4], evs[6]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

// plain cyclic Jacobi; matrices here are tiny and well scaled
fn jacobi_eigenvalues_sym8(a: &mut [[f64; 8]; 8]) -> [f64; 8] {
    const N: usize = 8;
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..N {
            for q in (p + 1)..N {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut evs = [0.0; 8];
    for (k, ev) in evs.iter_mut().enumerate() {
        *ev = a[k][k];
    }
    evs
}

/// Worst-case invariant deviations seen across an integration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// max |tr ρ − 1| over accepted steps.
    pub max_trace_dev: f64,
    /// max Hermiticity defect over accepted steps.
    pub max_herm_defect: f64,
    /// smallest eigenvalue seen over accepted steps.
    pub min_eigenvalue: f64,
    pub n_steps: usize,
    pub n_rejected: usize,
}

impl InvariantReport {
    pub fn new() -> Self {
        InvariantReport {
            max_trace_dev: 0.0,
            max_herm_defect: 0.0,
            min_eigenvalue: f64::INFINITY,
            n_steps: 0,
            n_rejected: 0,
        }
    }

    pub fn record(&mut self, rho: &DensityMatrix4) {
        self.max_trace_dev = self.max_trace_dev.max((rho.trace().re - 1.0).abs());
        self.max_herm_defect = self.max_herm_defect.max(rho.hermiticity_defect());
        self.min_eigenvalue = self.min_eigenvalue.min(rho.min_eigenvalue());
        self.n_steps += 1;
    }
}

impl Default for InvariantReport {
    fn default() -> Self {
        Self::new()
    }
}
