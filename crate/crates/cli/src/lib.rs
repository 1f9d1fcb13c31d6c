//! Config-driven front end for the hybrid-risk library.
//!
//! A run is described by one TOML file naming a model (a preset or an inline
//! definition), a ruin type, a method and the domain. See `docs/formats.md`
//! for the output files.

pub mod analytic;
pub mod assemble;
pub mod commands;
pub mod config;
pub mod output;
