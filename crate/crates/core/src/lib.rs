//! System-level simulator for millimeter-wave MIMO cellular downlink.
//!
//! The crate couples a clustered mmWave channel model with SVD beamforming and
//! an association-dependent rate model, and compares per-slot time-fractional
//! association (solved with a genetic algorithm) against three static
//! baselines: max-SINR with drop, max-SINR with stream sharing and drop, and a
//! capacity-constrained full-interference load balancer.
//!
//! Module map:
//!
//! - [`channel`]: array responses, LoS probability, path loss, small-scale draws.
//! - [`beamforming`]: SVD partition and equal-power precoder/combiner pairs.
//! - [`rate`]: interference covariance, log-det rates, slot utilities.
//! - [`association`]: activation/association structures and baseline schemes.
//! - [`ga`]: per-slot genetic search, repair operator and exhaustive oracle.
//! - [`harness`]: scenarios, experiments, power sweeps and result files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod ga;
pub mod harness;
pub mod linalg;
pub mod rate;
pub mod rng;

pub use error::{Error, Result};

/// Complex matrix type used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
/// Complex column vector.
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
