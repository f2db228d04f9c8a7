use bayesmon::conjugate::{
    BetaAB, BinomialBeta, Dist, ExponentialGamma, GammaShapeRate, GaussianKnownVariance, GaussianMeanVar,
    InControlReference,
};
use bayesmon::format::g17;
use bayesmon::recoverable::{DurationPrior, FilterConfig, FilterState};
use bayesmon::rng::RngStream;
use bayesmon::special::{expit, logit};
use bayesmon::tracking::{
    AcceptableRegion, GaussianRandomWalk, LogitBinomialWalk, LogitInit, MultivariateGaussianWalk, ParticleEnsemble,
    Side, StateSpaceModel,
};

use crate::config::{matrix, Loaded, ModelSpec, PfSettings, Prior, Reference, RegionSpec, TrackedObservation};
use crate::input::read_scalar_file;
use crate::Failure;

pub const CONJUGATE_HEADER: [&str; 4] = ["t", "p_ic", "signal", "n_states"];
pub const PF_HEADER: [&str; 6] = ["t", "p_a", "signal", "mean", "ess", "resampled"];

fn gamma(p: Prior) -> Result<GammaShapeRate, Failure> {
    Ok(match p {
        Prior::MeanSd { mean, sd } => GammaShapeRate::from_mean_sd(mean, sd)?,
        Prior::Gamma { shape, rate } => GammaShapeRate::new(shape, rate)?,
        Prior::Beta { .. } => return Err(Failure::Usage("a Gamma prior needs mean/sd or shape/rate".into())),
    })
}

fn beta(p: Prior) -> Result<BetaAB, Failure> {
    Ok(match p {
        Prior::MeanSd { mean, sd } => BetaAB::from_mean_sd(mean, sd)?,
        Prior::Beta { a, b } => BetaAB::new(a, b)?,
        Prior::Gamma { .. } => return Err(Failure::Usage("a Beta prior needs mean/sd or a/b".into())),
    })
}

fn normal(p: Prior) -> Result<GaussianMeanVar, Failure> {
    match p {
        Prior::MeanSd { mean, sd } => Ok(GaussianMeanVar::new(mean, sd * sd)?),
        _ => Err(Failure::Usage("a Normal prior needs mean/sd".into())),
    }
}

fn counts(data: &[f64], trials: u64) -> Result<Vec<u64>, Failure> {
    data.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 && v <= trials as f64 {
                Ok(v as u64)
            } else {
                Err(Failure::Parse(format!("phase I value {} ({v}) is not a count in 0..={trials}", i + 1)))
            }
        })
        .collect()
}

/// A configuration resolved into a concrete model.
pub enum Resolved {
    Exp(FilterConfig<ExponentialGamma>),
    Binom(FilterConfig<BinomialBeta>),
    Gauss(FilterConfig<GaussianKnownVariance>),
    PfGauss(GaussianRandomWalk, AcceptableRegion, PfSettings, f64),
    PfBinom(LogitBinomialWalk, AcceptableRegion, PfSettings, f64),
    PfMulti(MultivariateGaussianWalk, AcceptableRegion, PfSettings, f64),
}

fn scalar_region(spec: Option<&RegionSpec>, map: impl Fn(f64) -> f64) -> Result<AcceptableRegion, Failure> {
    Ok(match spec {
        Some(RegionSpec::Interval { lower, upper }) => AcceptableRegion::interval(map(*lower), map(*upper))?,
        Some(RegionSpec::AtMost { bound }) => AcceptableRegion::half_line(map(*bound), Side::AtMost)?,
        Some(RegionSpec::AtLeast { bound }) => AcceptableRegion::half_line(map(*bound), Side::AtLeast)?,
        Some(_) => return Err(Failure::Usage("scalar tracking needs an interval, at-most or at-least region".into())),
        None => return Err(Failure::Usage("tracking models need a [region] section".into())),
    })
}

impl Resolved {
    pub fn new(loaded: &Loaded, delta: f64) -> Result<Self, Failure> {
        let cfg = &loaded.config;
        let d = cfg.durations;
        let durations = || -> Result<(DurationPrior, DurationPrior), Failure> {
            Ok((
                DurationPrior::geometric_mean(d.in_control_mean)?,
                DurationPrior::geometric_mean(d.out_of_control_mean)?,
            ))
        };
        let phase1 = |file: &std::path::Path| read_scalar_file(&loaded.resolve(file));
        let finish = |c: FilterConfigAny| -> Resolved {
            let f = cfg.filter;
            match c {
                FilterConfigAny::Exp(c) => Resolved::Exp(c.with_prune_tol(f.prune_tol).absorbing(f.absorbing)),
                FilterConfigAny::Binom(c) => Resolved::Binom(c.with_prune_tol(f.prune_tol).absorbing(f.absorbing)),
                FilterConfigAny::Gauss(c) => Resolved::Gauss(c.with_prune_tol(f.prune_tol).absorbing(f.absorbing)),
            }
        };
        if cfg.particles.count == 0 {
            return Err(Failure::Usage("particle count must be positive".into()));
        }
        Ok(match &cfg.model {
            ModelSpec::ExponentialGamma {
                reference,
                out_of_control,
            } => {
                let reference = match reference {
                    Reference::Point { value } => InControlReference::PointMass(*value),
                    Reference::Phase1 { file, prior } => InControlReference::Posterior(gamma(*prior)?.update(&phase1(file)?)?),
                };
                let model = ExponentialGamma {
                    reference,
                    ooc_prior: gamma(*out_of_control)?,
                };
                let (a, b) = durations()?;
                finish(FilterConfigAny::Exp(FilterConfig::new(model, a, b, delta)))
            }
            ModelSpec::BinomialBeta {
                trials,
                reference,
                out_of_control,
            } => {
                let reference = match reference {
                    Reference::Point { value } => InControlReference::PointMass(*value),
                    Reference::Phase1 { file, prior } => {
                        InControlReference::Posterior(beta(*prior)?.update(&counts(&phase1(file)?, *trials)?, *trials)?)
                    }
                };
                let model = BinomialBeta {
                    batch_size: *trials,
                    reference,
                    ooc_prior: beta(*out_of_control)?,
                };
                let (a, b) = durations()?;
                finish(FilterConfigAny::Binom(FilterConfig::new(model, a, b, delta)))
            }
            ModelSpec::Gaussian {
                obs_sd,
                reference,
                out_of_control,
            } => {
                let obs_var = obs_sd * obs_sd;
                let reference = match reference {
                    Reference::Point { value } => InControlReference::PointMass(*value),
                    Reference::Phase1 { file, prior } => {
                        InControlReference::Posterior(normal(*prior)?.update(&phase1(file)?, obs_var)?)
                    }
                };
                let model = GaussianKnownVariance {
                    obs_var,
                    reference,
                    ooc_prior: normal(*out_of_control)?,
                };
                let (a, b) = durations()?;
                finish(FilterConfigAny::Gauss(FilterConfig::new(model, a, b, delta)))
            }
            ModelSpec::TrackingPf {
                observation,
                state_sd,
                obs_sd,
                trials,
                initial,
            } => match observation {
                TrackedObservation::Gaussian => {
                    let obs_sd = obs_sd.ok_or_else(|| Failure::Usage("gaussian tracking needs obs_sd".into()))?;
                    let init = normal(*initial)?;
                    let model = GaussianRandomWalk::new(*state_sd, obs_sd, init.mean, init.variance.sqrt())?;
                    Resolved::PfGauss(model, scalar_region(cfg.region.as_ref(), |x| x)?, cfg.particles, delta)
                }
                TrackedObservation::Binomial => {
                    let trials = trials.ok_or_else(|| Failure::Usage("binomial tracking needs trials".into()))?;
                    let init = match initial {
                        Prior::MeanSd { mean, sd } => LogitInit::Normal { mean: *mean, sd: *sd },
                        Prior::Beta { a, b } => LogitInit::Beta(BetaAB::new(*a, *b)?),
                        Prior::Gamma { .. } => return Err(Failure::Usage("binomial tracking needs a logit-normal or Beta initial prior".into())),
                    };
                    let model = LogitBinomialWalk::new(trials, *state_sd, init)?;
                    Resolved::PfBinom(model, scalar_region(cfg.region.as_ref(), logit)?, cfg.particles, delta)
                }
            },
            ModelSpec::Multivariate {
                initial_mean,
                initial_cov,
                transition_cov,
                obs_cov,
            } => {
                let model = MultivariateGaussianWalk::new(
                    initial_mean.clone(),
                    &matrix(initial_cov, "initial_cov")?,
                    &matrix(transition_cov, "transition_cov")?,
                    &matrix(obs_cov, "obs_cov")?,
                )?;
                let region = match &cfg.region {
                    Some(RegionSpec::Box { lower, upper }) => AcceptableRegion::boxed(lower.clone(), upper.clone())?,
                    Some(RegionSpec::Ellipsoid {
                        center,
                        shape,
                        radius_sq,
                    }) => {
                        let inverse = matrix(shape, "shape")?
                            .try_inverse()
                            .ok_or_else(|| Failure::Usage("ellipsoid shape matrix is singular".into()))?;
                        if !(*radius_sq >= 0.0) {
                            return Err(Failure::Usage("radius_sq must be nonnegative".into()));
                        }
                        AcceptableRegion::ellipsoid(center.clone(), inverse, radius_sq.sqrt())?
                    }
                    _ => return Err(Failure::Usage("multivariate tracking needs a box or ellipsoid region".into())),
                };
                Resolved::PfMulti(model, region, cfg.particles, delta)
            }
        })
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Resolved::PfGauss(..) | Resolved::PfBinom(..) | Resolved::PfMulti(..))
    }

    /// Number of values per observation row.
    pub fn dimension(&self) -> usize {
        match self {
            Resolved::PfMulti(m, ..) => m.dimension(),
            _ => 1,
        }
    }

    pub fn header(&self) -> &'static [&'static str] {
        if self.is_stochastic() {
            &PF_HEADER
        } else {
            &CONJUGATE_HEADER
        }
    }

    pub fn engine(&self, stream: Option<RngStream>) -> Result<Engine, Failure> {
        let need = || stream.ok_or_else(|| Failure::Usage("--seed is required for particle filters".into()));
        Ok(match self {
            Resolved::Exp(c) => Engine::Exp(FilterState::new(c.clone())?),
            Resolved::Binom(c) => Engine::Binom(FilterState::new(c.clone())?),
            Resolved::Gauss(c) => Engine::Gauss(FilterState::new(c.clone())?),
            Resolved::PfGauss(m, r, s, d) => Engine::PfGauss(
                ParticleEnsemble::new(m.clone(), r.clone(), s.count, s.resample_frac, need()?)?,
                *d,
            ),
            Resolved::PfBinom(m, r, s, d) => Engine::PfBinom(
                ParticleEnsemble::new(m.clone(), r.clone(), s.count, s.resample_frac, need()?)?,
                *d,
            ),
            Resolved::PfMulti(m, r, s, d) => Engine::PfMulti(
                ParticleEnsemble::new(m.clone(), r.clone(), s.count, s.resample_frac, need()?)?,
                *d,
            ),
        })
    }

    /// One in-control path of the monitoring statistic: parameter drawn from
    /// the in-control reference (or initial distribution), held constant.
    pub fn calibration_path(&self, horizon: usize, stream: RngStream) -> bayesmon::Result<Vec<f64>> {
        let mut theta_rng = stream.named("theta").rng();
        let mut obs_rng = stream.named("obs").rng();
        let run_conjugate = |path: Vec<MonitorRow>| Ok(path.into_iter().map(|r| r.p).collect());
        match self {
            Resolved::Exp(c) => {
                let rate = match c.model.reference {
                    InControlReference::PointMass(v) => v,
                    InControlReference::Posterior(g) => Dist::Gamma(g).draw(&mut theta_rng),
                };
                let ys: Vec<f64> = (0..horizon).map(|_| Dist::Exponential { rate }.draw(&mut obs_rng)).collect();
                bayesmon::recoverable::p_ic_path(c, &ys)
            }
            Resolved::Binom(c) => {
                let p = match c.model.reference {
                    InControlReference::PointMass(v) => v,
                    InControlReference::Posterior(b) => Dist::Beta(b).draw(&mut theta_rng),
                };
                let trials = c.model.batch_size;
                let ys: Vec<u64> = (0..horizon)
                    .map(|_| Dist::Binomial { trials, p }.draw(&mut obs_rng) as u64)
                    .collect();
                bayesmon::recoverable::p_ic_path(c, &ys)
            }
            Resolved::Gauss(c) => {
                let mean = match c.model.reference {
                    InControlReference::PointMass(v) => v,
                    InControlReference::Posterior(g) => Dist::Normal {
                        mean: g.mean,
                        sd: g.variance.sqrt(),
                    }
                    .draw(&mut theta_rng),
                };
                let sd = c.model.obs_var.sqrt();
                let ys: Vec<f64> = (0..horizon).map(|_| Dist::Normal { mean, sd }.draw(&mut obs_rng)).collect();
                bayesmon::recoverable::p_ic_path(c, &ys)
            }
            Resolved::PfGauss(m, ..) => {
                let theta = m.sample_initial(&mut theta_rng);
                let sd = m.obs_sd;
                let mut e = self.engine(Some(stream.named("pf"))).map_err(Failure::into_lib)?;
                let rows = (0..horizon)
                    .map(|_| e.step_values(&[Dist::Normal { mean: theta, sd }.draw(&mut obs_rng)]))
                    .collect::<bayesmon::Result<Vec<_>>>()?;
                run_conjugate(rows)
            }
            Resolved::PfBinom(m, ..) => {
                let p = expit(m.sample_initial(&mut theta_rng));
                let trials = m.batch_size;
                let mut e = self.engine(Some(stream.named("pf"))).map_err(Failure::into_lib)?;
                let rows = (0..horizon)
                    .map(|_| e.step_values(&[Dist::Binomial { trials, p }.draw(&mut obs_rng)]))
                    .collect::<bayesmon::Result<Vec<_>>>()?;
                run_conjugate(rows)
            }
            Resolved::PfMulti(m, ..) => {
                let theta = m.sample_initial(&mut theta_rng);
                let chol = m.obs_chol().clone();
                let d = theta.len();
                let mut e = self.engine(Some(stream.named("pf"))).map_err(Failure::into_lib)?;
                let rows = (0..horizon)
                    .map(|_| {
                        let z: Vec<f64> = (0..d)
                            .map(|_| Dist::Normal { mean: 0.0, sd: 1.0 }.draw(&mut obs_rng))
                            .collect();
                        let y: Vec<f64> = (0..d)
                            .map(|i| theta[i] + (0..=i).map(|j| chol[(i, j)] * z[j]).sum::<f64>())
                            .collect();
                        e.step_values(&y)
                    })
                    .collect::<bayesmon::Result<Vec<_>>>()?;
                run_conjugate(rows)
            }
        }
    }
}

enum FilterConfigAny {
    Exp(FilterConfig<ExponentialGamma>),
    Binom(FilterConfig<BinomialBeta>),
    Gauss(FilterConfig<GaussianKnownVariance>),
}

pub enum Engine {
    Exp(FilterState<ExponentialGamma>),
    Binom(FilterState<BinomialBeta>),
    Gauss(FilterState<GaussianKnownVariance>),
    PfGauss(ParticleEnsemble<GaussianRandomWalk>, f64),
    PfBinom(ParticleEnsemble<LogitBinomialWalk>, f64),
    PfMulti(ParticleEnsemble<MultivariateGaussianWalk>, f64),
}

/// One output record.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorRow {
    pub t: usize,
    pub p: f64,
    pub signal: bool,
    pub n_states: Option<usize>,
    pub mean: Option<f64>,
    pub ess: Option<f64>,
    pub resampled: Option<bool>,
}

impl MonitorRow {
    pub fn cells(&self) -> Vec<String> {
        let mut c = vec![self.t.to_string(), g17(self.p), u8::from(self.signal).to_string()];
        if let Some(n) = self.n_states {
            c.push(n.to_string());
        } else {
            c.push(g17(self.mean.unwrap_or(f64::NAN)));
            c.push(g17(self.ess.unwrap_or(f64::NAN)));
            c.push(u8::from(self.resampled.unwrap_or(false)).to_string());
        }
        c
    }
}

fn count(y: f64) -> bayesmon::Result<u64> {
    if y >= 0.0 && y.fract() == 0.0 && y < 1e18 {
        Ok(y as u64)
    } else {
        Err(bayesmon::Error::Domain(format!("count observation must be a nonnegative integer, got {y}")))
    }
}

impl Engine {
    pub fn step_values(&mut self, y: &[f64]) -> bayesmon::Result<MonitorRow> {
        let conj = |r: bayesmon::recoverable::MonitorRecord| MonitorRow {
            t: r.t,
            p: r.p_ic,
            signal: r.signaled,
            n_states: Some(r.n_states),
            mean: None,
            ess: None,
            resampled: None,
        };
        let pf = |s: bayesmon::tracking::PfStep, delta: f64| MonitorRow {
            t: s.t,
            p: s.p_region,
            signal: s.p_region < delta,
            n_states: None,
            mean: Some(s.mean),
            ess: Some(s.ess),
            resampled: Some(s.resampled),
        };
        Ok(match self {
            Engine::Exp(f) => conj(f.step(y[0])?),
            Engine::Binom(f) => conj(f.step(count(y[0])?)?),
            Engine::Gauss(f) => conj(f.step(y[0])?),
            Engine::PfGauss(e, d) => pf(e.step(&y[0])?, *d),
            Engine::PfBinom(e, d) => pf(e.step(&count(y[0])?)?, *d),
            Engine::PfMulti(e, d) => pf(e.step(y)?, *d),
        })
    }
}
