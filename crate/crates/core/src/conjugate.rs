//! Conjugate priors, Phase I updates and log-scale predictive densities.
//!
//! Every density here is returned on the log scale. Callers combine them with
//! [`crate::special::log_sum_exp`].

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::special::{ln_beta, ln_choose, ln_normal_pdf};
use crate::{Error, Result};

/// Gamma distribution in shape/rate form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaShapeRate {
    pub shape: f64,
    pub rate: f64,
}

impl GammaShapeRate {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::domain(format!(
                "gamma parameters must be positive and finite, got shape={shape}, rate={rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    /// Gamma with the given mean and standard deviation: shape = mu^2/sigma^2, rate = mu/sigma^2.
    pub fn from_mean_sd(mean: f64, sd: f64) -> Result<Self> {
        if !(mean > 0.0 && sd > 0.0) {
            return Err(Error::domain(format!(
                "gamma mean and sd must be positive, got mean={mean}, sd={sd}"
            )));
        }
        let var = sd * sd;
        Self::new(mean * mean / var, mean / var)
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn sd(&self) -> f64 {
        self.shape.sqrt() / self.rate
    }

    /// Posterior after observing Exponential(theta) data: `Gamma(shape + m, rate + sum x)`.
    pub fn update(&self, data: &[f64]) -> Result<Self> {
        if let Some(bad) = data.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::domain(format!(
                "exponential observations must be positive, got {bad}"
            )));
        }
        Self::new(
            self.shape + data.len() as f64,
            self.rate + data.iter().sum::<f64>(),
        )
    }
}

/// Beta distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaAB {
    pub a: f64,
    pub b: f64,
}

impl BetaAB {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::domain(format!(
                "beta parameters must be positive and finite, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    /// Beta with the given mean and standard deviation (requires `sd^2 < mean (1 - mean)`).
    pub fn from_mean_sd(mean: f64, sd: f64) -> Result<Self> {
        if !(mean > 0.0 && mean < 1.0 && sd > 0.0) {
            return Err(Error::domain(format!(
                "beta mean must lie in (0,1) and sd be positive, got mean={mean}, sd={sd}"
            )));
        }
        let k = mean * (1.0 - mean) / (sd * sd) - 1.0;
        if k <= 0.0 {
            return Err(Error::domain(format!(
                "sd={sd} too large for a beta distribution with mean={mean}"
            )));
        }
        Self::new(mean * k, (1.0 - mean) * k)
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn sd(&self) -> f64 {
        let s = self.a + self.b;
        (self.a * self.b / (s * s * (s + 1.0))).sqrt()
    }

    /// Posterior after Binomial(batch_size, theta) counts.
    pub fn update(&self, counts: &[u64], batch_size: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::domain("batch size must be positive"));
        }
        if let Some(bad) = counts.iter().find(|&&c| c > batch_size) {
            return Err(Error::domain(format!(
                "count {bad} exceeds batch size {batch_size}"
            )));
        }
        let total: u64 = counts.iter().sum();
        let trials = counts.len() as u64 * batch_size;
        Self::new(self.a + total as f64, self.b + (trials - total) as f64)
    }
}

/// Normal distribution on a location parameter; `variance == 0` is a point mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMeanVar {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianMeanVar {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(mean.is_finite() && variance >= 0.0 && variance.is_finite()) {
            return Err(Error::domain(format!(
                "gaussian requires finite mean and nonnegative variance, got mean={mean}, variance={variance}"
            )));
        }
        Ok(Self { mean, variance })
    }

    /// Posterior after observing `data` with known observation variance.
    pub fn update(&self, data: &[f64], obs_var: f64) -> Result<Self> {
        if !(obs_var > 0.0) {
            return Err(Error::domain(format!("observation variance must be positive, got {obs_var}")));
        }
        if data.iter().any(|y| !y.is_finite()) {
            return Err(Error::domain("phase I data must be finite"));
        }
        if self.variance == 0.0 || data.is_empty() {
            return Ok(*self);
        }
        let precision = 1.0 / self.variance + data.len() as f64 / obs_var;
        let mean = (self.mean / self.variance + data.iter().sum::<f64>() / obs_var) / precision;
        Self::new(mean, 1.0 / precision)
    }
}

/// Sufficient statistics of one out-of-control segment.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegmentStats {
    pub count: u64,
    /// Sum of observations.
    pub sum: f64,
    /// Binomial trials accumulated (`count * N`); zero for other families.
    pub trials: u64,
}

/// The fixed in-control reference used throughout Phase II.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InControlReference<P> {
    /// The in-control parameter is known exactly.
    PointMass(f64),
    /// Conjugate (Phase I) posterior for the in-control parameter.
    Posterior(P),
}

pub fn gamma_from_mean_sd(mean: f64, sd: f64) -> Result<GammaShapeRate> {
    GammaShapeRate::from_mean_sd(mean, sd)
}

pub fn gamma_phase1_update(prior: GammaShapeRate, phase1: &[f64]) -> Result<GammaShapeRate> {
    prior.update(phase1)
}

pub fn beta_phase1_update(prior: BetaAB, counts: &[u64], batch_size: u64) -> Result<BetaAB> {
    prior.update(counts, batch_size)
}

/// Lomax log density `ln(alpha beta^alpha / (beta + y)^(alpha + 1))`: the Exponential
/// predictive under a Gamma(alpha, beta) rate.
pub fn log_pred_exponential_gamma(post: &GammaShapeRate, y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::domain(format!("exponential observation must be positive, got {y}")));
    }
    Ok(lomax_ln_pdf(post.shape, post.rate, y))
}

#[inline]
fn lomax_ln_pdf(shape: f64, rate: f64, y: f64) -> f64 {
    shape.ln() + shape * rate.ln() - (shape + 1.0) * (rate + y).ln()
}

/// Beta-Binomial log pmf `ln C(N,y) + ln B(y + a, N - y + b) - ln B(a, b)`.
pub fn log_pred_binomial_beta(post: &BetaAB, y: u64, batch_size: u64) -> Result<f64> {
    if y > batch_size {
        return Err(Error::domain(format!("count {y} exceeds batch size {batch_size}")));
    }
    Ok(beta_binomial_ln_pmf(post.a, post.b, y, batch_size))
}

#[inline]
fn beta_binomial_ln_pmf(a: f64, b: f64, y: u64, n: u64) -> f64 {
    let yf = y as f64;
    ln_choose(n, y) + ln_beta(yf + a, (n - y) as f64 + b) - ln_beta(a, b)
}

#[inline]
fn binomial_ln_pmf(p: f64, y: u64, n: u64) -> f64 {
    let yf = y as f64;
    let mut v = ln_choose(n, y);
    if y > 0 {
        v += yf * p.ln();
    }
    if y < n {
        v += (n - y) as f64 * (-p).ln_1p();
    }
    v
}

/// Gaussian predictive `N(reference.mean, reference.variance + obs_var)`.
pub fn log_pred_gaussian(reference: &GaussianMeanVar, obs_var: f64, y: f64) -> Result<f64> {
    if !(obs_var > 0.0) {
        return Err(Error::domain(format!("observation variance must be positive, got {obs_var}")));
    }
    if !y.is_finite() {
        return Err(Error::domain(format!("gaussian observation must be finite, got {y}")));
    }
    Ok(ln_normal_pdf(y, reference.mean, reference.variance + obs_var))
}

/// Observation family used by the recoverable-regime filter.
///
/// Implementations hold the fixed in-control reference and the prior for the
/// parameter of a fresh out-of-control segment.
pub trait ConjugateModel: Clone + Send + Sync + std::fmt::Debug {
    type Obs: Copy + Send + Sync + std::fmt::Debug;

    /// Rejects observations outside the support.
    fn validate(&self, y: Self::Obs) -> Result<()>;

    /// `ln m0(y)`: predictive under the fixed in-control reference.
    fn log_pred_in_control(&self, y: Self::Obs) -> f64;

    /// Predictive under the out-of-control posterior of a segment with the given statistics.
    fn log_pred_out_of_control(&self, stats: &SegmentStats, y: Self::Obs) -> f64;

    fn absorb(&self, stats: &mut SegmentStats, y: Self::Obs);
}

/// Exponential time-between-events with Gamma priors on the rate.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentialGamma {
    pub reference: InControlReference<GammaShapeRate>,
    pub ooc_prior: GammaShapeRate,
}

impl ConjugateModel for ExponentialGamma {
    type Obs = f64;

    fn validate(&self, y: f64) -> Result<()> {
        if y > 0.0 && y.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("time between events must be positive, got {y}")))
        }
    }

    #[inline]
    fn log_pred_in_control(&self, y: f64) -> f64 {
        match self.reference {
            InControlReference::PointMass(rate) => rate.ln() - rate * y,
            InControlReference::Posterior(g) => lomax_ln_pdf(g.shape, g.rate, y),
        }
    }

    #[inline]
    fn log_pred_out_of_control(&self, stats: &SegmentStats, y: f64) -> f64 {
        lomax_ln_pdf(
            self.ooc_prior.shape + stats.count as f64,
            self.ooc_prior.rate + stats.sum,
            y,
        )
    }

    #[inline]
    fn absorb(&self, stats: &mut SegmentStats, y: f64) {
        stats.count += 1;
        stats.sum += y;
    }
}

/// Binomial defect counts out of a fixed batch size with Beta priors.
#[derive(Clone, Debug, PartialEq)]
pub struct BinomialBeta {
    pub batch_size: u64,
    pub reference: InControlReference<BetaAB>,
    pub ooc_prior: BetaAB,
}

impl ConjugateModel for BinomialBeta {
    type Obs = u64;

    fn validate(&self, y: u64) -> Result<()> {
        if y <= self.batch_size {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "count {y} exceeds batch size {}",
                self.batch_size
            )))
        }
    }

    fn log_pred_in_control(&self, y: u64) -> f64 {
        match self.reference {
            InControlReference::PointMass(p) => binomial_ln_pmf(p, y, self.batch_size),
            InControlReference::Posterior(beta) => {
                beta_binomial_ln_pmf(beta.a, beta.b, y, self.batch_size)
            }
        }
    }

    fn log_pred_out_of_control(&self, stats: &SegmentStats, y: u64) -> f64 {
        let a = self.ooc_prior.a + stats.sum;
        let b = self.ooc_prior.b + (stats.trials as f64 - stats.sum);
        beta_binomial_ln_pmf(a, b, y, self.batch_size)
    }

    fn absorb(&self, stats: &mut SegmentStats, y: u64) {
        stats.count += 1;
        stats.sum += y as f64;
        stats.trials += self.batch_size;
    }
}

/// Gaussian observations with known variance and a Normal prior on the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKnownVariance {
    pub obs_var: f64,
    pub reference: InControlReference<GaussianMeanVar>,
    pub ooc_prior: GaussianMeanVar,
}

impl GaussianKnownVariance {
    fn segment_posterior(&self, stats: &SegmentStats) -> GaussianMeanVar {
        let prior = self.ooc_prior;
        if prior.variance == 0.0 || stats.count == 0 {
            return prior;
        }
        let precision = 1.0 / prior.variance + stats.count as f64 / self.obs_var;
        let mean = (prior.mean / prior.variance + stats.sum / self.obs_var) / precision;
        GaussianMeanVar {
            mean,
            variance: 1.0 / precision,
        }
    }
}

impl ConjugateModel for GaussianKnownVariance {
    type Obs = f64;

    fn validate(&self, y: f64) -> Result<()> {
        if y.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("gaussian observation must be finite, got {y}")))
        }
    }

    fn log_pred_in_control(&self, y: f64) -> f64 {
        match self.reference {
            InControlReference::PointMass(mean) => ln_normal_pdf(y, mean, self.obs_var),
            InControlReference::Posterior(g) => ln_normal_pdf(y, g.mean, g.variance + self.obs_var),
        }
    }

    fn log_pred_out_of_control(&self, stats: &SegmentStats, y: f64) -> f64 {
        let post = self.segment_posterior(stats);
        ln_normal_pdf(y, post.mean, post.variance + self.obs_var)
    }

    fn absorb(&self, stats: &mut SegmentStats, y: f64) {
        stats.count += 1;
        stats.sum += y;
    }
}

/// Distributions the simulators draw from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dist {
    Gamma(GammaShapeRate),
    Beta(BetaAB),
    /// Exponential with the given rate.
    Exponential { rate: f64 },
    Binomial { trials: u64, p: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Dist {
    /// One draw. Exponential draws always consume the same generator output
    /// whatever the rate, so mixtures over rates share stream positions.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Gamma(g) => rand_distr::Gamma::new(g.shape, 1.0 / g.rate)
                .expect("validated gamma parameters")
                .sample(rng),
            Dist::Beta(b) => rand_distr::Beta::new(b.a, b.b)
                .expect("validated beta parameters")
                .sample(rng),
            Dist::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            Dist::Binomial { trials, p } => rand_distr::Binomial::new(trials, p)
                .expect("binomial probability in [0,1]")
                .sample(rng) as f64,
            Dist::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
        }
    }
}

/// `count` independent draws from `dist`.
pub fn sample<R: Rng + ?Sized>(dist: &Dist, count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| dist.draw(rng)).collect()
}
