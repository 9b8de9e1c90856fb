//! Distributed reduced-rank parameter estimation over wireless sensor networks.
//!
//! The crate simulates a network of sensor nodes that jointly estimate an
//! unknown parameter vector from local noisy linear measurements. Besides the
//! reduced-rank joint-iterative NLMS scheme (nodes exchange only a
//! `D`-dimensional estimate and keep an `M x D` projection locally), it ships
//! full-rank diffusion baselines, closed-form MMSE oracles and a seeded
//! Monte-Carlo harness producing MSE learning curves, complexity and bandwidth
//! reports.
//!
//! Module map:
//! - [`network`]: random geometric topologies and Metropolis combination weights.
//! - [`signal`]: AR(1) regressors, ground truth and noisy measurements.
//! - [`algorithms`]: the reduced-rank scheme and the diffusion baselines.
//! - [`oracle`]: closed-form MMSE solutions and the Lagrangian used as test oracles.
//! - [`harness`]: scenario configs, Monte-Carlo runs, cost metering and CSV output.
//! - [`cli`]: the `driftrank` command-line front end.

// Range checks are written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod cli;
pub mod harness;
pub mod network;
pub mod oracle;
pub mod signal;

pub use num_complex::Complex64 as C64;

/// Column vector of complex samples.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
