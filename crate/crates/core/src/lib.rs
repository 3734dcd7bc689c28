//! Phase-space simulation of a deterministic squeezing gate driven by EPR
//! entanglement and homodyne feed-forward.
//!
//! Every state in the gate is Gaussian, so the simulator carries only mean
//! vectors and covariance matrices. [`protocol`] evaluates the gate either
//! analytically or shot by shot, [`tomography`] rebuilds states from shot
//! records, [`metrics`] scores them and [`oracle`] cross-checks the closed
//! forms by direct phase-space integration.

// Range checks are written `!(x >= 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod gaussian;
pub mod measurement;
pub mod metrics;
pub mod oracle;
pub mod protocol;
pub mod tomography;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, SymplecticTransform};
pub use protocol::{Axis, GateConfig, GateResult};
