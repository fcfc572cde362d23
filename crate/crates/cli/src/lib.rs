//! Command-line runner for the exact samplers: benchmark sweeps, path
//! simulation and statistical validation against independent oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod simulate;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
