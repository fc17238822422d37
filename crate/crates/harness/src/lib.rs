//! Experiment harness: seeded training runs with CSV metrics, cross-seed
//! aggregation, SVG learning curves, parameter sweeps and the oracle
//! verification suite behind the `distcritic` binary.

pub mod aggregate;
pub mod config;
mod error;
pub mod metrics;
pub mod plot;
pub mod run;
pub mod stats;
pub mod sweep;
pub mod verify;

pub use error::{HarnessError, HarnessResult};
