//! Sequential Bayesian process monitoring.
//!
//! Two monitoring statistics are provided:
//!
//! * [`recoverable`]: the exact posterior probability that a process which may
//!   leave and later return to its in-control state is *currently* in control.
//! * [`tracking`]: the posterior probability that a drifting latent parameter
//!   lies inside an acceptable region, computed with a bootstrap particle filter.
//!
//! [`calibration`] chooses signalling thresholds by posterior-predictive
//! simulation, and [`experiments`] reproduces the benchmark studies built on top
//! of [`scenario`] generators and [`metrics`].

pub mod calibration;
pub mod conjugate;
pub mod covariance;
pub mod error;
pub mod experiments;
pub mod format;
pub mod kalman;
pub mod metrics;
pub mod recoverable;
pub mod rng;
pub mod scenario;
pub mod special;
pub mod tracking;
pub mod wine;

pub use error::{Error, Result};
