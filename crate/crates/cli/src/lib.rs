//! Library surface of the scenario harness: configuration, sweep running
//! and export, shared by the `eitxpm` binary and the integration suites.

pub mod config;
pub mod export;
pub mod runner;
