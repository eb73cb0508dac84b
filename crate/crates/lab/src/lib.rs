//! Experiment driver for the stochastic nonlinear Schrödinger core: config
//! files, presets, field and artifact IO, a rayon replica runner and the
//! subcommands behind the `snls` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod fieldio;
pub mod presets;
pub mod runner;
pub mod svg;

pub use error::{LabError, LabResult};
