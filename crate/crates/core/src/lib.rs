//! Pooled data: recover a label vector `β ∈ [d]^p` with known label
//! proportions `π` from tests that report, per label, how many pooled items
//! carry it.
//!
//! - [`model`]: proportions, label vectors, test designs, observation channels.
//! - [`infotheory`]: entropies, counting primitives, Gaussian-mixture information.
//! - [`bounds`]: phase-transition thresholds and converse bounds.
//! - [`decode`]: exhaustive ML decoding and the exact noiseless error oracle.
//! - [`experiments`]: seeded Monte Carlo estimates and sweeps.
//! - [`cli`]: the `pooled-data` command-line front end.
//!
//! Labels are 0-based and all logarithms are natural.

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod decode;
pub mod error;
pub mod experiments;
pub mod infotheory;
pub mod model;
pub mod quad;
pub mod seed;

pub use error::{Error, Result};
pub use model::{
    LabelAssignment, LabelCounts, NoiseModel, ObservationMatrix, Proportions, TestDesign,
};
