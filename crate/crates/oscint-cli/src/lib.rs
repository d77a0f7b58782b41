//! Experiment harness for the oscillatory-integrator library: accuracy
//! sweeps, conservation audits, spectral and confinement studies, kinetic
//! damping runs, and oracle cross-checks, each exposed as a library runner
//! returning measured numbers plus named pass/fail gates, and wired to a
//! CLI that emits plot-ready CSV files.
//!
//! Every runner takes its parameters from a [`config::RunConfig`] section
//! so the CLI, the unit tests, and the acceptance suite exercise the same
//! code paths at different scales.

pub mod config;
pub mod confinement;
pub mod convergence;
pub mod dft;
pub mod energy;
pub mod fit;
pub mod landau;
pub mod oracle_suite;
pub mod report;
pub mod spectrum;
pub mod systems;

pub use config::RunConfig;
pub use report::{all_passed, GateOutcome};
