//! Secrecy-rate maximization for IRS-assisted Gaussian MIMO wiretap channels.
//!
//! The transmitter's covariance `R` and the surface's unit-modulus phase
//! vector `q` are optimized alternately: a barrier/Newton saddle-point solver
//! handles `R` for fixed `q`, and a minorization-maximization loop with a
//! closed-form unimodular update handles `q` for fixed `R`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ao;
pub mod channel;
pub mod covariance;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod objective;
pub mod phase;

pub use error::{Error, Result};
