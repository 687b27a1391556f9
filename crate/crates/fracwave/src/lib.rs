//! Experiment harness for the space-fractional wave equation: configuration
//! files, convergence sweeps, energy audits, snapshots and matrix dumps on
//! top of [`fracwave_core`].

pub mod config;
pub mod error;
pub mod harness;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use fracwave_core as numerics;
