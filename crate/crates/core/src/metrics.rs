//! Detection, recovery and false-signal metrics of a signal path.
//!
//! Times are 1-based. A delay is `t - origin` for the first qualifying `t`
//! in the event window; when no such `t` exists the event is missed. An
//! event may require an earlier event to have been observed, in which case it
//! is skipped (neither observed nor missed) otherwise.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// First signalling time.
    FirstSignal,
    /// First time a new episode starts (signal now, none at the previous step).
    NewEpisode,
    /// First non-signalling time.
    FirstNonSignal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventSpec {
    pub name: String,
    pub kind: EventKind,
    /// Inclusive search window.
    pub window: (usize, usize),
    pub origin: usize,
    /// Index of an earlier event that must have been observed.
    pub requires: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSpec {
    pub horizon: usize,
    pub events: Vec<EventSpec>,
    /// Episodes starting, and signalling timepoints, inside these windows are false.
    pub false_windows: Vec<(usize, usize)>,
    /// Record whether the chart is signalling at this time.
    pub transition: Option<usize>,
}

fn event(name: &str, kind: EventKind, window: (usize, usize), origin: usize, requires: Option<usize>) -> EventSpec {
    EventSpec {
        name: name.into(),
        kind,
        window,
        origin,
        requires,
    }
}

impl ScoreSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |(s, e): (usize, usize)| {
            if s == 0 || e < s || e > self.horizon {
                Err(Error::domain(format!(
                    "window {s}..={e} outside horizon 1..={}",
                    self.horizon
                )))
            } else {
                Ok(())
            }
        };
        for (i, ev) in self.events.iter().enumerate() {
            check(ev.window)?;
            if let Some(r) = ev.requires {
                if r >= i {
                    return Err(Error::domain(format!("event {} requires a later event", ev.name)));
                }
            }
        }
        for w in &self.false_windows {
            check(*w)?;
        }
        if let Some(t) = self.transition {
            check((t.max(1), t))?;
        }
        Ok(())
    }

    /// Change at 100 in a 200-step stream.
    pub fn single_change() -> Self {
        Self {
            horizon: 200,
            events: vec![event("d1", EventKind::FirstSignal, (101, 200), 100, None)],
            false_windows: vec![(1, 100)],
            transition: None,
        }
    }

    /// Out of control on 51..=100 and 151..=200.
    pub fn recoverable() -> Self {
        Self {
            horizon: 200,
            events: vec![
                event("d1", EventKind::FirstSignal, (51, 100), 50, None),
                event("d2", EventKind::FirstNonSignal, (101, 150), 100, Some(0)),
                event("d3", EventKind::FirstSignal, (151, 200), 150, None),
            ],
            false_windows: vec![(1, 50), (101, 150)],
            transition: None,
        }
    }

    /// Latent parameter unacceptable on `leave..ret`; delays measured from
    /// `leave` and `ret`, false episodes are those starting before `leave`.
    pub fn tracking(leave: usize, ret: usize, horizon: usize) -> Self {
        Self {
            horizon,
            events: vec![
                event("d1", EventKind::FirstSignal, (leave, ret - 1), leave, None),
                event("d2", EventKind::FirstNonSignal, (ret, horizon), ret, Some(0)),
            ],
            false_windows: vec![(1, leave - 1)],
            transition: None,
        }
    }

    /// Acceptable 1..=50, degraded 51..=100, acceptable 101..=150; detection
    /// must be a new episode in the degraded block.
    pub fn degraded_block() -> Self {
        Self {
            horizon: 150,
            events: vec![
                event("d1", EventKind::NewEpisode, (51, 100), 50, None),
                event("d2", EventKind::FirstNonSignal, (101, 150), 100, Some(0)),
            ],
            false_windows: vec![(1, 50)],
            transition: Some(50),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Observed(usize),
    Missed,
    Skipped,
}

impl Outcome {
    pub fn delay(self) -> Option<usize> {
        match self {
            Outcome::Observed(d) => Some(d),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub outcomes: Vec<Outcome>,
    pub false_episodes: usize,
    pub false_timepoints: usize,
    pub signaling_at_transition: bool,
}

/// Score a signal sequence (`signals[t-1]` is the decision at time `t`).
pub fn score_signals(signals: &[bool], spec: &ScoreSpec) -> Result<RunMetrics> {
    spec.validate()?;
    if signals.len() != spec.horizon {
        return Err(Error::Dimension {
            expected: spec.horizon,
            got: signals.len(),
        });
    }
    let sig = |t: usize| t >= 1 && signals[t - 1];
    let starts = |t: usize| sig(t) && !sig(t - 1);
    let mut outcomes: Vec<Outcome> = Vec::with_capacity(spec.events.len());
    for ev in &spec.events {
        if let Some(r) = ev.requires {
            if !matches!(outcomes[r], Outcome::Observed(_)) {
                outcomes.push(Outcome::Skipped);
                continue;
            }
        }
        let hit = (ev.window.0..=ev.window.1).find(|&t| match ev.kind {
            EventKind::FirstSignal => sig(t),
            EventKind::NewEpisode => starts(t),
            EventKind::FirstNonSignal => !sig(t),
        });
        outcomes.push(hit.map_or(Outcome::Missed, |t| Outcome::Observed(t - ev.origin)));
    }
    let in_false = |t: usize| spec.false_windows.iter().any(|&(s, e)| s <= t && t <= e);
    let false_episodes = (1..=spec.horizon).filter(|&t| in_false(t) && starts(t)).count();
    let false_timepoints = (1..=spec.horizon).filter(|&t| in_false(t) && sig(t)).count();
    Ok(RunMetrics {
        outcomes,
        false_episodes,
        false_timepoints,
        signaling_at_transition: spec.transition.is_some_and(sig),
    })
}

/// Score a monitoring-statistic path at threshold `delta` (signal when `p < delta`).
pub fn score_run(path: &[f64], delta: f64, spec: &ScoreSpec) -> Result<RunMetrics> {
    let signals: Vec<bool> = path.iter().map(|&p| p < delta).collect();
    score_signals(&signals, spec)
}

/// Mean with its Monte Carlo standard error `sd / sqrt(n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStat {
    pub mean: f64,
    pub mcse: f64,
    pub n: usize,
}

impl MeanStat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut s, mut ss) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            s += v;
            ss += v * v;
        }
        if n == 0 {
            return Self {
                mean: f64::NAN,
                mcse: f64::NAN,
                n,
            };
        }
        let nf = n as f64;
        let mean = s / nf;
        let mcse = if n > 1 {
            (((ss - nf * mean * mean) / (nf - 1.0)).max(0.0) / nf).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, mcse, n }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelayStat {
    pub name: String,
    /// Over observed events only.
    pub delay: MeanStat,
    pub observed: usize,
    pub missed: usize,
}

impl DelayStat {
    /// Missed over (observed + missed); skipped runs are excluded.
    pub fn miss_rate(&self) -> f64 {
        let n = self.observed + self.missed;
        if n == 0 {
            f64::NAN
        } else {
            self.missed as f64 / n as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateTable {
    pub label: String,
    pub replicates: usize,
    pub delays: Vec<DelayStat>,
    pub false_episodes: MeanStat,
    pub false_timepoints: MeanStat,
    pub signaling_at_transition: f64,
}

impl AggregateTable {
    pub fn delay(&self, name: &str) -> Option<&DelayStat> {
        self.delays.iter().find(|d| d.name == name)
    }
}

/// Combine per-replicate metrics (in replicate order) into summary statistics.
pub fn aggregate(label: &str, spec: &ScoreSpec, runs: &[RunMetrics]) -> AggregateTable {
    let delays = spec
        .events
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let delay = MeanStat::of(runs.iter().filter_map(|r| r.outcomes[i].delay().map(|d| d as f64)));
            DelayStat {
                name: ev.name.clone(),
                observed: delay.n,
                missed: runs.iter().filter(|r| r.outcomes[i] == Outcome::Missed).count(),
                delay,
            }
        })
        .collect();
    let n = runs.len().max(1) as f64;
    AggregateTable {
        label: label.into(),
        replicates: runs.len(),
        delays,
        false_episodes: MeanStat::of(runs.iter().map(|r| r.false_episodes as f64)),
        false_timepoints: MeanStat::of(runs.iter().map(|r| r.false_timepoints as f64)),
        signaling_at_transition: runs.iter().filter(|r| r.signaling_at_transition).count() as f64 / n,
    }
}
