// Posterior over (last changepoint, regime) by enumerating every regime path.
//
// Independent of the recursive filter: the prior of a path is the product of
// hazard/survival factors, in-control observations contribute their
// predictive density one by one, and each out-of-control segment contributes
// the closed-form marginal likelihood of its observations.

#![allow(dead_code)]

use std::collections::HashMap;

use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::ln_gamma;

pub const IC: u8 = 0;
pub const OOC: u8 = 1;

pub struct Enumeration<'a> {
    pub ic_loglik: &'a dyn Fn(f64) -> f64,
    pub ooc_segment_loglik: &'a dyn Fn(&[f64]) -> f64,
    pub hazard_ic: &'a dyn Fn(usize) -> f64,
    pub hazard_ooc: &'a dyn Fn(usize) -> f64,
    pub absorbing: bool,
}

impl Enumeration<'_> {
    /// Normalized `q_T(r, s)` keyed by `(changepoint, regime)`.
    pub fn posterior(&self, ys: &[f64]) -> HashMap<(usize, u8), f64> {
        let t_max = ys.len();
        assert!((1..=20).contains(&t_max));
        let mut logs: Vec<((usize, u8), f64)> = Vec::new();
        // bit k of `mask` set: regime switches between observation k+1 and k+2
        for mask in 0u32..(1 << (t_max - 1)) {
            let mut regime = vec![IC; t_max];
            let mut start = vec![0usize; t_max];
            let mut log_prior = 0.0;
            let mut ok = true;
            for t in 1..t_max {
                let prev = regime[t - 1];
                let run = t - start[t - 1];
                let h = if prev == IC {
                    (self.hazard_ic)(run)
                } else if self.absorbing {
                    0.0
                } else {
                    (self.hazard_ooc)(run)
                };
                if mask >> (t - 1) & 1 == 1 {
                    if h == 0.0 {
                        ok = false;
                        break;
                    }
                    regime[t] = 1 - prev;
                    start[t] = t;
                    log_prior += h.ln();
                } else {
                    regime[t] = prev;
                    start[t] = start[t - 1];
                    log_prior += (1.0 - h).ln();
                }
            }
            if !ok {
                continue;
            }
            let mut ll = 0.0;
            let mut t = 1; // the first observation is in control by construction
            while t < t_max {
                if regime[t] == IC {
                    ll += (self.ic_loglik)(ys[t]);
                    t += 1;
                } else {
                    let s = t;
                    while t < t_max && regime[t] == OOC {
                        t += 1;
                    }
                    ll += (self.ooc_segment_loglik)(&ys[s..t]);
                }
            }
            logs.push(((start[t_max - 1], regime[t_max - 1]), log_prior + ll));
        }
        let m = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|x| (x.1 - m).exp()).sum();
        let mut out = HashMap::new();
        for (k, l) in logs {
            *out.entry(k).or_insert(0.0) += (l - m).exp() / z;
        }
        out
    }
}

pub fn p_in_control(q: &HashMap<(usize, u8), f64>) -> f64 {
    q.iter().filter(|(k, _)| k.1 == IC).map(|(_, v)| v).sum()
}

/// Exponential observations, Gamma(shape, rate) rate: joint marginal of a segment.
pub fn gamma_exponential_marginal(shape: f64, rate: f64, ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let s: f64 = ys.iter().sum();
    ln_gamma(shape + n) - ln_gamma(shape) + shape * rate.ln() - (shape + n) * (rate + s).ln()
}

/// Binomial(trials, p) counts, Beta(a, b) probability: joint marginal of a segment.
pub fn beta_binomial_marginal(a: f64, b: f64, trials: u64, ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let s: f64 = ys.iter().sum();
    let choose: f64 = ys.iter().map(|&y| ln_binomial(trials, y as u64)).sum();
    choose + ln_beta(a + s, b + n * trials as f64 - s) - ln_beta(a, b)
}
