//! Particle approximation of the recoverable-regime filter.
//!
//! Each particle carries a changepoint, a regime and the statistics of its
//! current segment. Segment ends are proposed from the duration hazards and
//! the incremental weight is the one-step predictive of the new observation.

use rand::Rng;

use super::pf::systematic_resample;
use crate::conjugate::{ConjugateModel, SegmentStats};
use crate::recoverable::{signals, FilterConfig, Regime};
use crate::rng::{RngStream, StreamRng};
use crate::special::log_sum_exp;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeParticle {
    pub changepoint: usize,
    pub regime: Regime,
    pub stats: SegmentStats,
}

pub struct RegimeParticleFilter<M: ConjugateModel> {
    config: FilterConfig<M>,
    particles: Vec<RegimeParticle>,
    spare: Vec<RegimeParticle>,
    log_w: Vec<f64>,
    w: Vec<f64>,
    resample_frac: f64,
    rng: StreamRng,
    t: usize,
}

/// Output of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeStep {
    pub t: usize,
    pub p_ic: f64,
    pub signaled: bool,
    pub ess: f64,
}

impl<M: ConjugateModel> RegimeParticleFilter<M> {
    pub fn new(config: FilterConfig<M>, n_particles: usize, resample_frac: f64, stream: RngStream) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::domain("particle count must be positive"));
        }
        if !(config.threshold > 0.0 && config.threshold < 1.0) {
            return Err(Error::domain(format!(
                "signalling threshold must lie in (0,1), got {}",
                config.threshold
            )));
        }
        let start = RegimeParticle {
            changepoint: 0,
            regime: Regime::InControl,
            stats: SegmentStats::default(),
        };
        Ok(Self {
            config,
            particles: vec![start; n_particles],
            spare: vec![start; n_particles],
            log_w: vec![0.0; n_particles],
            w: vec![1.0 / n_particles as f64; n_particles],
            resample_frac,
            rng: stream.rng(),
            t: 0,
        })
    }

    pub fn particles(&self) -> &[RegimeParticle] {
        &self.particles
    }

    pub fn step(&mut self, y: M::Obs) -> Result<RegimeStep> {
        let model = &self.config.model;
        model.validate(y)?;
        let n = self.particles.len();
        if self.t == 0 {
            self.t = 1;
            return Ok(RegimeStep {
                t: 1,
                p_ic: 1.0,
                signaled: false,
                ess: n as f64,
            });
        }
        let t = self.t;
        let ln_ic = model.log_pred_in_control(y);
        for (p, lw) in self.particles.iter_mut().zip(self.log_w.iter_mut()) {
            let d = t - p.changepoint;
            let h = match p.regime {
                Regime::InControl => self.config.dur_ic.hazard(d),
                Regime::OutOfControl if self.config.absorbing_ooc => 0.0,
                Regime::OutOfControl => self.config.dur_ooc.hazard(d),
            };
            let u: f64 = self.rng.random();
            if u < h {
                p.changepoint = t;
                p.stats = SegmentStats::default();
                p.regime = match p.regime {
                    Regime::InControl => Regime::OutOfControl,
                    Regime::OutOfControl => Regime::InControl,
                };
            }
            match p.regime {
                Regime::InControl => *lw += ln_ic,
                Regime::OutOfControl => {
                    *lw += model.log_pred_out_of_control(&p.stats, y);
                    model.absorb(&mut p.stats, y);
                }
            }
        }
        let total = log_sum_exp(&self.log_w);
        if !total.is_finite() {
            return Err(Error::Degenerate { t: t + 1 });
        }
        let mut p_ic = 0.0;
        let mut sum_sq = 0.0;
        for ((lw, w), p) in self.log_w.iter_mut().zip(self.w.iter_mut()).zip(&self.particles) {
            *lw -= total;
            *w = lw.exp();
            sum_sq += *w * *w;
            if p.regime == Regime::InControl {
                p_ic += *w;
            }
        }
        let ess = 1.0 / sum_sq;
        if ess < self.resample_frac * n as f64 {
            let idx = systematic_resample(&self.w, &mut self.rng);
            for (dst, &a) in self.spare.iter_mut().zip(&idx) {
                *dst = self.particles[a];
            }
            std::mem::swap(&mut self.particles, &mut self.spare);
            self.log_w.fill(-(n as f64).ln());
            self.w.fill(1.0 / n as f64);
        }
        self.t = t + 1;
        let p_ic = p_ic.clamp(0.0, 1.0);
        Ok(RegimeStep {
            t: t + 1,
            p_ic,
            signaled: signals(p_ic, self.config.threshold),
            ess,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::{ExponentialGamma, GammaShapeRate, InControlReference};
    use crate::recoverable::{p_ic_path, DurationPrior};

    #[test]
    fn tracks_the_exact_filter() {
        let model = ExponentialGamma {
            reference: InControlReference::PointMass(10.0),
            ooc_prior: GammaShapeRate::new(16.0, 0.4).unwrap(),
        };
        let cfg = FilterConfig::new(
            model,
            DurationPrior::geometric(0.05).unwrap(),
            DurationPrior::geometric(0.05).unwrap(),
            0.5,
        );
        let mut ys = vec![0.1; 20];
        ys.extend(vec![0.025; 20]);
        let exact = p_ic_path(&cfg, &ys).unwrap();
        let mut pf = RegimeParticleFilter::new(cfg, 20_000, 0.5, RngStream::root(4)).unwrap();
        for (t, y) in ys.iter().enumerate() {
            let s = pf.step(*y).unwrap();
            assert!((s.p_ic - exact[t]).abs() < 0.03, "t={} {} vs {}", t + 1, s.p_ic, exact[t]);
        }
    }
}
