//! Simulation toolkit for EIT-enhanced cross-phase modulation in a four-level
//! N-scheme cold-atom ensemble.
//!
//! The crate is organised around two routes to the same observable — the
//! transient phase shift a weak signal pulse writes onto an EIT probe:
//!
//! - [`bloch`] integrates the four-level master equation from first
//!   principles and converts the probe coherence into phase/transmission
//!   traces, optionally propagating through a stack of thin slabs.
//! - [`lti`] treats the medium as a linear time-invariant system with a
//!   decaying-exponential impulse response, giving closed forms for the
//!   temporal profile, the medium response time and the integrated phase
//!   per photon.
//!
//! Around these sit [`spectroscopy`] (transparency-window and AC-Stark
//! characterisation scans), [`detection`] (beat-note synthesis, quadrature
//! demodulation, boxcar sampling and multi-shot averaging) and [`fit`]
//! (damped least-squares fitting of the temporal-profile model, the analysis
//! applied to measured traces).
//!
//! Conventions: every rate, detuning and spectral width is stored as an
//! angular frequency in rad/s; times are seconds. [`units::to_angular`]
//! bridges from quoted Hz values.

// `!(x > 0.0)` rejects NaN where `x <= 0.0` would accept it; indexed loops
// are the native style for the small fixed-size matrix algebra here.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bloch;
pub mod detection;
pub mod error;
pub mod fit;
pub mod lti;
pub mod math;
pub mod spectroscopy;
pub mod trace;
pub mod types;
pub mod units;

pub use error::{Error, Result};
pub use trace::PhaseTrace;
pub use types::{FieldParams, MediumParams, SignalPulse, SpectralWindow, TimeGrid};
