//! Plumbing behind the `lfsim` binary: scenario files and presets, output
//! rendering, and seed sweeps. The binary itself only parses arguments and
//! maps errors to exit codes.

pub mod config;
pub mod output;
pub mod sweep;
