//! Simulation and numerical verification of empirical quantile processes
//! built from i.i.d. copies of self-similar processes.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod empirical;
pub mod error;
pub mod harness;
pub mod limit;
pub mod models;
pub mod normal;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use models::{Family, MarginalLaw, ProcessSpec};

/// Tool version recorded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
