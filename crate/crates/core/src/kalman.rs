//! Scalar Kalman filter for the Gaussian random walk; exact reference for the
//! particle filter on that model.

use crate::special::normal_cdf;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KalmanState {
    pub mean: f64,
    pub var: f64,
    pub process_var: f64,
    pub obs_var: f64,
}

impl KalmanState {
    /// Prior `theta_0 ~ N(mean, var)`.
    pub fn new(mean: f64, var: f64, process_var: f64, obs_var: f64) -> Result<Self> {
        if !(var >= 0.0 && process_var >= 0.0 && obs_var > 0.0) {
            return Err(Error::domain("Kalman variances must be nonnegative, observation variance positive"));
        }
        Ok(Self {
            mean,
            var,
            process_var,
            obs_var,
        })
    }

    /// Predict one step then condition on `y`.
    pub fn step(&mut self, y: f64) {
        let pv = self.var + self.process_var;
        let k = pv / (pv + self.obs_var);
        self.mean += k * (y - self.mean);
        self.var = (1.0 - k) * pv;
    }

    /// `P(lower <= theta_t <= upper)` under the current posterior.
    pub fn region_prob(&self, lower: f64, upper: f64) -> f64 {
        let s = self.var.sqrt();
        if s == 0.0 {
            return if (lower..=upper).contains(&self.mean) { 1.0 } else { 0.0 };
        }
        (normal_cdf((upper - self.mean) / s) - normal_cdf((lower - self.mean) / s)).clamp(0.0, 1.0)
    }
}

pub fn kalman_step(state: &mut KalmanState, y: f64) {
    state.step(y);
}

pub fn kalman_region_prob(state: &KalmanState, lower: f64, upper: f64) -> f64 {
    state.region_prob(lower, upper)
}

/// Posterior means and region probabilities along a stream.
pub fn kalman_path(mut state: KalmanState, ys: &[f64], lower: f64, upper: f64) -> Vec<(f64, f64)> {
    ys.iter()
        .map(|&y| {
            state.step(y);
            (state.mean, state.region_prob(lower, upper))
        })
        .collect()
}
