//! Sweep orchestration for the quarantine-effect laboratory: config files,
//! deterministic grid execution, per-run and summary CSVs, and plot-ready
//! series extraction. The binary in `main.rs` is a thin wrapper over these
//! modules.

pub mod config;
pub mod runner;
pub mod series;
