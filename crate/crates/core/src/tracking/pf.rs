use rand::Rng;

use super::model::StateSpaceModel;
use super::region::{AcceptableRegion, StateVector};
use crate::rng::{RngStream, StreamRng};
use crate::special::log_sum_exp;
use crate::{Error, Result};

/// Effective sample size `1 / sum w_i^2` of normalized weights.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: one uniform offset, `n` evenly spaced positions.
///
/// `weights` must be normalized. Returns ancestor indices in increasing order.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(weights.len());
    systematic_into(weights, rng.random::<f64>(), &mut out);
    out
}

fn systematic_into(weights: &[f64], u0: f64, out: &mut Vec<usize>) {
    let n = weights.len();
    out.clear();
    if n == 0 {
        return;
    }
    let mut cum = 0.0;
    let mut i = 0;
    for j in 0..n {
        let pos = (j as f64 + u0) / n as f64;
        while i + 1 < n && cum + weights[i] <= pos {
            cum += weights[i];
            i += 1;
        }
        out.push(i);
    }
}

/// Output of one filtering step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PfStep {
    pub t: usize,
    /// Estimate of `P(theta_t in A | y_1..y_t)`.
    pub p_region: f64,
    /// Posterior mean of the first state coordinate.
    pub mean: f64,
    /// ESS after reweighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
}

/// Running totals over a stream.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunDiagnostics {
    pub steps: usize,
    pub resamples: usize,
    pub ess_sum: f64,
}

impl RunDiagnostics {
    pub fn mean_ess(&self) -> f64 {
        if self.steps == 0 {
            f64::NAN
        } else {
            self.ess_sum / self.steps as f64
        }
    }

    pub fn resample_fraction(&self) -> f64 {
        if self.steps == 0 {
            f64::NAN
        } else {
            self.resamples as f64 / self.steps as f64
        }
    }
}

/// Weighted particle approximation of the filtering distribution.
pub struct ParticleEnsemble<M: StateSpaceModel> {
    model: M,
    region: AcceptableRegion,
    particles: Vec<M::State>,
    spare: Vec<M::State>,
    log_w: Vec<f64>,
    w: Vec<f64>,
    ancestors: Vec<usize>,
    resample_frac: f64,
    rng: StreamRng,
    t: usize,
    diag: RunDiagnostics,
}

/// Draw `n_particles` from the initial distribution with uniform weights.
/// Resampling happens whenever ESS falls below `resample_frac * n_particles`.
pub fn pf_init<M: StateSpaceModel>(
    model: M,
    region: AcceptableRegion,
    n_particles: usize,
    resample_frac: f64,
    stream: RngStream,
) -> Result<ParticleEnsemble<M>>
where
    M::State: StateVector,
{
    ParticleEnsemble::new(model, region, n_particles, resample_frac, stream)
}

impl<M: StateSpaceModel> ParticleEnsemble<M>
where
    M::State: StateVector,
{
    pub fn new(
        model: M,
        region: AcceptableRegion,
        n_particles: usize,
        resample_frac: f64,
        stream: RngStream,
    ) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::domain("particle count must be positive"));
        }
        if !(0.0..=1.0).contains(&resample_frac) {
            return Err(Error::domain(format!(
                "resampling fraction must lie in [0,1], got {resample_frac}"
            )));
        }
        if region.dimension() != model.dimension() {
            return Err(Error::Dimension {
                expected: model.dimension(),
                got: region.dimension(),
            });
        }
        let mut rng = stream.rng();
        let particles: Vec<M::State> = (0..n_particles).map(|_| model.sample_initial(&mut rng)).collect();
        let lw = -(n_particles as f64).ln();
        Ok(Self {
            spare: particles.clone(),
            particles,
            log_w: vec![lw; n_particles],
            w: vec![1.0 / n_particles as f64; n_particles],
            ancestors: Vec::with_capacity(n_particles),
            model,
            region,
            resample_frac,
            rng,
            t: 0,
            diag: RunDiagnostics::default(),
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[M::State] {
        &self.particles
    }

    /// Normalized weights.
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn diagnostics(&self) -> RunDiagnostics {
        self.diag
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Propagate, reweight by `y`, estimate, and resample if needed.
    pub fn step(&mut self, y: &M::Obs) -> Result<PfStep> {
        self.model.validate_obs(y)?;
        let t = self.t + 1;
        for (p, lw) in self.particles.iter_mut().zip(self.log_w.iter_mut()) {
            self.model.propagate(p, &mut self.rng);
            *lw += self.model.log_obs(p, y);
        }
        let total = log_sum_exp(&self.log_w);
        if !total.is_finite() || self.log_w.iter().any(|v| v.is_nan()) {
            return Err(Error::Degenerate { t });
        }
        let mut p_region = 0.0;
        let mut mean = 0.0;
        let mut sum_sq = 0.0;
        for ((lw, w), p) in self.log_w.iter_mut().zip(self.w.iter_mut()).zip(&self.particles) {
            *lw -= total;
            *w = lw.exp();
            sum_sq += *w * *w;
            let x = p.coords();
            mean += *w * x[0];
            if self.region.contains_unchecked(x) {
                p_region += *w;
            }
        }
        let ess = 1.0 / sum_sq;
        let n = self.particles.len();
        let resampled = ess < self.resample_frac * n as f64;
        if resampled {
            let u0: f64 = self.rng.random();
            systematic_into(&self.w, u0, &mut self.ancestors);
            for (dst, &a) in self.spare.iter_mut().zip(&self.ancestors) {
                dst.clone_from(&self.particles[a]);
            }
            std::mem::swap(&mut self.particles, &mut self.spare);
            let lw = -(n as f64).ln();
            self.log_w.fill(lw);
            self.w.fill(1.0 / n as f64);
            self.diag.resamples += 1;
        }
        self.t = t;
        self.diag.steps += 1;
        self.diag.ess_sum += ess;
        Ok(PfStep {
            t,
            p_region: p_region.clamp(0.0, 1.0),
            mean,
            ess,
            resampled,
        })
    }
}

impl<M: StateSpaceModel> ParticleEnsemble<M>
where
    M::State: StateVector,
    M::Obs: Sized,
{
    /// Filter a whole stream.
    pub fn run(&mut self, observations: &[M::Obs]) -> Result<Vec<PfStep>> {
        observations.iter().map(|y| self.step(y)).collect()
    }
}
