//! Exact posterior over the most recent changepoint and the current regime.
//!
//! The state at time `t` is the discrete distribution
//! `q_t(r, s) = P(C_t = r, D_t = s | y_1..y_t)`, where the current segment began
//! with observation `r + 1` and `s` is the regime (in control or out of
//! control). Each step extends every surviving segment, opens a new
//! out-of-control segment from the in-control states and (unless the
//! single-change mode is selected) a new in-control segment from the
//! out-of-control states, then renormalizes in log space.

use serde::{Deserialize, Serialize};

use crate::conjugate::{ConjugateModel, SegmentStats};
use crate::special::log_sum_exp_iter;
use crate::{Error, Result};

/// Segment-duration prior, expressed through its hazard `h(d)`: the prior
/// probability that a segment ends right after its `d`-th observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DurationPrior {
    /// Geometric durations with success probability `p`; constant hazard `p`.
    Geometric { p: f64 },
    /// Explicit hazards `h(1), h(2), ...`; the last entry repeats for longer durations.
    Hazard(Vec<f64>),
}

impl DurationPrior {
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("geometric probability must lie in (0,1], got {p}")));
        }
        Ok(Self::Geometric { p })
    }

    /// Geometric durations with the given mean number of observations.
    pub fn geometric_mean(mean: f64) -> Result<Self> {
        if !(mean >= 1.0) {
            return Err(Error::domain(format!("mean duration must be at least 1, got {mean}")));
        }
        Self::geometric(1.0 / mean)
    }

    /// A segment that never ends (`h = 0`).
    pub fn never() -> Self {
        Self::Hazard(vec![0.0])
    }

    pub fn hazard_table(hazards: Vec<f64>) -> Result<Self> {
        if hazards.is_empty() {
            return Err(Error::domain("hazard table must not be empty"));
        }
        if let Some(h) = hazards.iter().find(|h| !(0.0..=1.0).contains(*h)) {
            return Err(Error::domain(format!("hazard {h} outside [0,1]")));
        }
        Ok(Self::Hazard(hazards))
    }

    /// Hazards from a duration pmf `g(1), g(2), ...`: `h(d) = g(d) / (1 - G(d-1))`.
    pub fn from_pmf(pmf: &[f64]) -> Result<Self> {
        let mut survival = 1.0;
        let mut hazards = Vec::with_capacity(pmf.len());
        for &g in pmf {
            if g < 0.0 {
                return Err(Error::domain(format!("negative duration probability {g}")));
            }
            let h = if survival > 0.0 { (g / survival).min(1.0) } else { 1.0 };
            hazards.push(h);
            survival -= g;
        }
        Self::hazard_table(hazards)
    }

    /// `h(d)` for `d >= 1`.
    pub fn hazard(&self, d: usize) -> f64 {
        match self {
            Self::Geometric { p } => *p,
            Self::Hazard(table) => {
                let i = d.saturating_sub(1).min(table.len() - 1);
                table[i]
            }
        }
    }

    fn log_hazards(&self, d: usize) -> (f64, f64) {
        let h = self.hazard(d);
        (h.ln(), (-h).ln_1p())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    InControl,
    OutOfControl,
}

impl Regime {
    pub fn index(self) -> u8 {
        match self {
            Regime::InControl => 0,
            Regime::OutOfControl => 1,
        }
    }
}

/// One support point of the filtering distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeState {
    /// The segment began with observation `changepoint + 1`.
    pub changepoint: usize,
    pub regime: Regime,
    /// Normalized log posterior mass.
    pub log_mass: f64,
    /// Out-of-control segments only.
    pub stats: SegmentStats,
}

#[derive(Clone, Debug)]
pub struct FilterConfig<M> {
    pub model: M,
    pub dur_ic: DurationPrior,
    pub dur_ooc: DurationPrior,
    /// Signal when `p_IC < threshold`.
    pub threshold: f64,
    /// States with normalized mass below this are dropped after each step.
    pub prune_tol: f64,
    /// Single-change mode: out-of-control segments never end.
    pub absorbing_ooc: bool,
}

impl<M> FilterConfig<M> {
    pub fn new(model: M, dur_ic: DurationPrior, dur_ooc: DurationPrior, threshold: f64) -> Self {
        Self {
            model,
            dur_ic,
            dur_ooc,
            threshold,
            prune_tol: 0.0,
            absorbing_ooc: false,
        }
    }

    pub fn with_prune_tol(mut self, eps: f64) -> Self {
        self.prune_tol = eps;
        self
    }

    pub fn absorbing(mut self, yes: bool) -> Self {
        self.absorbing_ooc = yes;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::domain(format!(
                "signalling threshold must lie in (0,1), got {}",
                self.threshold
            )));
        }
        check_prune_tol(self.prune_tol)
    }
}

fn check_prune_tol(eps: f64) -> Result<()> {
    if !(0.0..=0.01).contains(&eps) {
        return Err(Error::domain(format!("pruning tolerance must lie in [0, 0.01], got {eps}")));
    }
    Ok(())
}

/// Per-observation output of the filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorRecord {
    pub t: usize,
    pub p_ic: f64,
    pub signaled: bool,
    /// `(changepoint, regime)` of the state with the largest posterior mass.
    pub map_state: (usize, Regime),
    pub n_states: usize,
}

/// Signal rule; strict so that `p_ic == threshold` does not signal.
#[inline]
pub fn signals(p: f64, threshold: f64) -> bool {
    p < threshold
}

#[derive(Clone, Debug)]
pub struct FilterState<M> {
    t: usize,
    states: Vec<RegimeState>,
    config: FilterConfig<M>,
    // log-mass contributions flowing into the two new states
    scratch_to_ic: Vec<f64>,
    scratch_to_ooc: Vec<f64>,
}

pub fn filter_init<M: ConjugateModel>(config: FilterConfig<M>) -> Result<FilterState<M>> {
    FilterState::new(config)
}

impl<M: ConjugateModel> FilterState<M> {
    pub fn new(config: FilterConfig<M>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            t: 0,
            states: Vec::new(),
            config,
            scratch_to_ic: Vec::new(),
            scratch_to_ooc: Vec::new(),
        })
    }

    /// Number of observations processed.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn states(&self) -> &[RegimeState] {
        &self.states
    }

    pub fn config(&self) -> &FilterConfig<M> {
        &self.config
    }

    /// Current posterior probability of being in control.
    pub fn p_in_control(&self) -> f64 {
        let p: f64 = self
            .states
            .iter()
            .filter(|s| s.regime == Regime::InControl)
            .map(|s| s.log_mass.exp())
            .sum();
        p.clamp(0.0, 1.0)
    }

    /// Posterior mass of `(changepoint, regime)`, zero if the state is absent.
    pub fn mass(&self, changepoint: usize, regime: Regime) -> f64 {
        self.states
            .iter()
            .find(|s| s.changepoint == changepoint && s.regime == regime)
            .map_or(0.0, |s| s.log_mass.exp())
    }

    /// Incorporate the next observation.
    pub fn step(&mut self, y: M::Obs) -> Result<MonitorRecord> {
        self.config.model.validate(y)?;
        if self.t == 0 {
            self.states.push(RegimeState {
                changepoint: 0,
                regime: Regime::InControl,
                log_mass: 0.0,
                stats: SegmentStats::default(),
            });
            self.t = 1;
            return Ok(self.record());
        }

        let t = self.t;
        let cfg = &self.config;
        let model = &cfg.model;
        let ln_ic_pred = model.log_pred_in_control(y);

        let log_terms_ic = &mut self.scratch_to_ic;
        let log_terms_ooc = &mut self.scratch_to_ooc;
        log_terms_ic.clear();
        log_terms_ooc.clear();

        for st in self.states.iter_mut() {
            let d = t - st.changepoint;
            match st.regime {
                Regime::InControl => {
                    let (ln_h, ln_stay) = cfg.dur_ic.log_hazards(d);
                    if st.log_mass > f64::NEG_INFINITY {
                        log_terms_ooc.push(st.log_mass + ln_h);
                    }
                    st.log_mass += ln_ic_pred + ln_stay;
                }
                Regime::OutOfControl => {
                    let ln_stay = if cfg.absorbing_ooc {
                        0.0
                    } else {
                        let (ln_h, ln_stay) = cfg.dur_ooc.log_hazards(d);
                        if st.log_mass > f64::NEG_INFINITY {
                            log_terms_ic.push(st.log_mass + ln_h);
                        }
                        ln_stay
                    };
                    st.log_mass += model.log_pred_out_of_control(&st.stats, y) + ln_stay;
                    model.absorb(&mut st.stats, y);
                }
            }
        }
        let into_ooc = log_sum_exp_iter(log_terms_ooc.iter().copied());
        let into_ic = log_sum_exp_iter(log_terms_ic.iter().copied());

        if !cfg.absorbing_ooc {
            self.states.push(RegimeState {
                changepoint: t,
                regime: Regime::InControl,
                log_mass: into_ic + ln_ic_pred,
                stats: SegmentStats::default(),
            });
        }
        let fresh = SegmentStats::default();
        let mut stats = fresh;
        let ln_new_ooc = into_ooc + model.log_pred_out_of_control(&fresh, y);
        model.absorb(&mut stats, y);
        self.states.push(RegimeState {
            changepoint: t,
            regime: Regime::OutOfControl,
            log_mass: ln_new_ooc,
            stats,
        });

        let total = log_sum_exp_iter(self.states.iter().map(|s| s.log_mass));
        if !total.is_finite() {
            return Err(Error::Numerical {
                t: t + 1,
                reason: format!("total posterior mass is {total}"),
            });
        }
        for st in self.states.iter_mut() {
            st.log_mass -= total;
        }
        self.t = t + 1;

        if self.config.prune_tol > 0.0 {
            self.prune(self.config.prune_tol)?;
        }
        Ok(self.record())
    }

    /// Drop states whose normalized mass is below `eps` and renormalize.
    pub fn prune(&mut self, eps: f64) -> Result<()> {
        check_prune_tol(eps)?;
        if eps == 0.0 {
            return Ok(());
        }
        let ln_eps = eps.ln();
        self.states.retain(|s| s.log_mass >= ln_eps);
        if self.states.is_empty() {
            return Err(Error::Numerical {
                t: self.t,
                reason: format!("pruning at tolerance {eps} removed every state"),
            });
        }
        let total = log_sum_exp_iter(self.states.iter().map(|s| s.log_mass));
        for st in self.states.iter_mut() {
            st.log_mass -= total;
        }
        Ok(())
    }

    fn record(&self) -> MonitorRecord {
        let p_ic = self.p_in_control();
        let map = self
            .states
            .iter()
            .fold(None::<&RegimeState>, |best, s| match best {
                Some(b) if b.log_mass >= s.log_mass => Some(b),
                _ => Some(s),
            })
            .map_or((0, Regime::InControl), |s| (s.changepoint, s.regime));
        MonitorRecord {
            t: self.t,
            p_ic,
            signaled: signals(p_ic, self.config.threshold),
            map_state: map,
            n_states: self.states.len(),
        }
    }
}

/// Remove low-mass states from a filter state.
pub fn filter_prune<M: ConjugateModel>(state: &mut FilterState<M>, eps: f64) -> Result<()> {
    state.prune(eps)
}

/// Run the filter over a whole stream.
pub fn run_stream<M: ConjugateModel>(
    config: &FilterConfig<M>,
    observations: &[M::Obs],
) -> Result<Vec<MonitorRecord>> {
    let mut state = FilterState::new(config.clone())?;
    observations.iter().map(|&y| state.step(y)).collect()
}

/// The `p_IC` path of a stream.
pub fn p_ic_path<M: ConjugateModel>(config: &FilterConfig<M>, observations: &[M::Obs]) -> Result<Vec<f64>> {
    Ok(run_stream(config, observations)?.into_iter().map(|r| r.p_ic).collect())
}
