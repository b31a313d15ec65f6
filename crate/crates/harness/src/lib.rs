//! Orchestration of the concept-attribution pipeline: configuration, run
//! directories with digest manifests, the pipeline stages, and the `cattr`
//! command line.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csv;
pub mod error;
pub mod run;
pub mod stages;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
