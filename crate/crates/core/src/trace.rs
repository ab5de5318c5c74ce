//! Uniformly sampled phase traces and their CSV representation.
//!
//! CSV layout: optional leading `#` comment lines, a `time_s,phase_rad,stderr_rad`
//! header, then one row per sample (stderr column left empty when absent).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TimeGrid;

/// Probe-phase time series with optional per-sample standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub grid: TimeGrid,
    /// Phase samples, rad.
    pub phase: Vec<f64>,
    /// Per-sample standard error, rad.
    pub stderr: Option<Vec<f64>>,
    /// Notes accumulated by producers, e.g. coarse-grid accuracy warnings.
    pub warnings: Vec<String>,
}

impl PhaseTrace {
    pub fn new(grid: TimeGrid, phase: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if phase.len() != grid.n_samples {
            return Err(Error::Grid(format!(
                "sample count {} does not match grid length {}",
                phase.len(),
                grid.n_samples
            )));
        }
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::Grid("non-finite phase sample".into()));
        }
        Ok(PhaseTrace {
            grid,
            phase,
            stderr: None,
            warnings: Vec::new(),
        })
    }

    pub fn with_stderr(mut self, stderr: Vec<f64>) -> Result<Self> {
        if stderr.len() != self.phase.len() {
            return Err(Error::Grid("stderr length mismatch".into()));
        }
        self.stderr = Some(stderr);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    /// Peak sample value.
    pub fn max_phase(&self) -> f64 {
        self.phase.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation at time `t` (clamped to the grid).
    pub fn at(&self, t: f64) -> f64 {
        crate::math::lerp_at(&self.phase, (t - self.grid.t_start) / self.grid.dt)
    }

    /// Write in the trace CSV format, prefixing provenance comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "time_s,phase_rad,stderr_rad")?;
        for (k, t) in self.grid.times().enumerate() {
            match &self.stderr {
                Some(s) => writeln!(w, "{:.12e},{:.12e},{:.12e}", t, self.phase[k], s[k])?,
                None => writeln!(w, "{:.12e},{:.12e},", t, self.phase[k])?,
            }
        }
        Ok(())
    }

    /// Parse the trace CSV format.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut phase = Vec::new();
        let mut stderr = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Grid(format!("read failure: {e}")))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header && line.starts_with("time_s") {
                saw_header = true;
                continue;
            }
            let mut fields = line.split(',');
            let t: f64 = fields
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Grid(format!("bad time field at line {}", lineno + 1)))?;
            let p: f64 = fields
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Grid(format!("bad phase field at line {}", lineno + 1)))?;
            let s = fields.next().map(str::trim).filter(|s| !s.is_empty());
            times.push(t);
            phase.push(p);
            if let Some(s) = s {
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Grid(format!("bad stderr field at line {}", lineno + 1)))?;
                stderr.push(v);
            }
        }
        if times.len() < 2 {
            return Err(Error::Grid("trace needs at least two samples".into()));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let grid = TimeGrid::new(times[0], dt, times.len())?;
        // reject wildly non-uniform time columns
        for (k, &t) in times.iter().enumerate() {
            if (t - grid.time(k)).abs() > 1e-6 * dt.abs().max(1e-30) * (1.0 + k as f64) {
                return Err(Error::Grid(format!("non-uniform time grid near row {k}")));
            }
        }
        let mut trace = PhaseTrace::new(grid, phase)?;
        if stderr.len() == trace.len() {
            trace = trace.with_stderr(stderr)?;
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let grid = TimeGrid::new(-1e-6, 67e-9, 40).unwrap();
        let phase: Vec<f64> = (0..40).map(|k| (k as f64 * 0.01).sin() * 1e-2).collect();
        let stderr: Vec<f64> = (0..40).map(|k| 1e-4 + 1e-6 * k as f64).collect();
        let trace = PhaseTrace::new(grid, phase)
            .unwrap()
            .with_stderr(stderr)
            .unwrap();

        let mut buf = Vec::new();
        trace
            .write_csv(&mut buf, &["config_hash=deadbeef".into()])
            .unwrap();
        let parsed = PhaseTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed.len(), trace.len());
        for k in 0..trace.len() {
            assert!((parsed.phase[k] - trace.phase[k]).abs() < 1e-15);
            assert!(
                (parsed.stderr.as_ref().unwrap()[k] - trace.stderr.as_ref().unwrap()[k]).abs()
                    < 1e-15
            );
            assert!((parsed.grid.time(k) - trace.grid.time(k)).abs() < 1e-18);
        }
    }

    #[test]
    fn csv_without_stderr() {
        let grid = TimeGrid::new(0.0, 1e-9, 5).unwrap();
        let trace = PhaseTrace::new(grid, vec![0.0, 1.0, 2.0, 1.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, &[]).unwrap();
        let parsed = PhaseTrace::read_csv(buf.as_slice()).unwrap();
        assert!(parsed.stderr.is_none());
        assert_eq!(parsed.phase, trace.phase);
    }

    #[test]
    fn rejects_length_mismatch() {
        let grid = TimeGrid::new(0.0, 1e-9, 5).unwrap();
        assert!(PhaseTrace::new(grid, vec![0.0; 4]).is_err());
    }
}
