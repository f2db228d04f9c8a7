//! Data-generating scenarios for the simulation studies.
//!
//! A scenario is a piecewise latent trajectory over `t = 1..=horizon`, an
//! observation family, optional Phase I sampling, and the true out-of-control
//! windows used for scoring.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::rng::RngStream;
use crate::{Error, Result};

/// One piece of a latent trajectory on the inclusive range `start..=end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Piece {
    Constant { start: usize, end: usize, value: f64 },
    /// `intercept + rise * (t - origin) / run`.
    Linear {
        start: usize,
        end: usize,
        origin: usize,
        intercept: f64,
        rise: f64,
        run: f64,
    },
}

impl Piece {
    fn range(&self) -> (usize, usize) {
        match *self {
            Piece::Constant { start, end, .. } | Piece::Linear { start, end, .. } => (start, end),
        }
    }

    fn value(&self, t: usize) -> f64 {
        match *self {
            Piece::Constant { value, .. } => value,
            Piece::Linear {
                origin,
                intercept,
                rise,
                run,
                ..
            } => intercept + rise * (t as f64 - origin as f64) / run,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObservationModel {
    /// Exponential with the latent value as rate.
    Exponential,
    /// Binomial counts out of `trials` with the latent value as probability.
    Binomial { trials: u64 },
    /// Latent value plus Gaussian noise.
    Gaussian { sd: f64 },
}

/// Phase I sample; each draw comes from `contaminant` with probability `contamination`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase1Spec {
    pub size: usize,
    pub value: f64,
    pub contamination: f64,
    pub contaminant: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub horizon: usize,
    pub latent: Vec<Piece>,
    pub observation: ObservationModel,
    pub phase1: Option<Phase1Spec>,
    /// True out-of-control (or unacceptable) windows, inclusive.
    pub ooc_windows: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub phase1: Vec<f64>,
    pub observations: Vec<f64>,
    pub latent: Vec<f64>,
    pub in_control: Vec<bool>,
}

impl ScenarioSpec {
    /// Checks that the pieces tile `1..=horizon` in order.
    pub fn validate(&self) -> Result<()> {
        let mut next = 1;
        for p in &self.latent {
            let (s, e) = p.range();
            if s != next || e < s {
                return Err(Error::domain(format!(
                    "scenario {}: piece {s}..={e} does not continue at {next}",
                    self.name
                )));
            }
            next = e + 1;
        }
        if next != self.horizon + 1 && self.horizon > 0 {
            return Err(Error::domain(format!(
                "scenario {}: pieces end at {} but horizon is {}",
                self.name,
                next - 1,
                self.horizon
            )));
        }
        if let Some(p) = &self.phase1 {
            if !(0.0..=1.0).contains(&p.contamination) {
                return Err(Error::domain("contamination must lie in [0,1]"));
            }
        }
        Ok(())
    }

    /// `theta_t` for `t = 1..=horizon`.
    pub fn latent_path(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.horizon);
        for p in &self.latent {
            let (s, e) = p.range();
            for t in s..=e.min(self.horizon) {
                out.push(p.value(t));
            }
        }
        out.truncate(self.horizon);
        out
    }

    pub fn in_control_flags(&self) -> Vec<bool> {
        (1..=self.horizon)
            .map(|t| !self.ooc_windows.iter().any(|&(s, e)| s <= t && t <= e))
            .collect()
    }
}

fn draw_obs<R: Rng + ?Sized>(model: ObservationModel, theta: f64, rng: &mut R) -> f64 {
    match model {
        ObservationModel::Exponential => {
            let e: f64 = Exp1.sample(rng);
            e / theta
        }
        ObservationModel::Binomial { trials } => rand_distr::Binomial::new(trials, theta)
            .expect("probability in [0,1]")
            .sample(rng) as f64,
        ObservationModel::Gaussian { sd } => {
            let z: f64 = StandardNormal.sample(rng);
            theta + sd * z
        }
    }
}

/// Phase I draws. A uniform is consumed for every draw whatever the
/// contamination level, so `contamination = 0` reproduces the clean sample.
pub fn phase1_sample<R: Rng + ?Sized>(spec: &Phase1Spec, model: ObservationModel, rng: &mut R) -> Vec<f64> {
    (0..spec.size)
        .map(|_| {
            let u: f64 = rng.random();
            let theta = if u < spec.contamination {
                spec.contaminant
            } else {
                spec.value
            };
            draw_obs(model, theta, rng)
        })
        .collect()
}

/// Observations drawn from `model` along a latent path.
pub fn observe_path<R: Rng + ?Sized>(model: ObservationModel, latent: &[f64], rng: &mut R) -> Vec<f64> {
    latent.iter().map(|&th| draw_obs(model, th, rng)).collect()
}

/// Draw Phase I (stream `phase1`) and Phase II (stream `phase2`) data.
pub fn generate_scenario(spec: &ScenarioSpec, stream: RngStream) -> Result<Realization> {
    spec.validate()?;
    let phase1 = match &spec.phase1 {
        Some(p) => phase1_sample(p, spec.observation, &mut stream.named("phase1").rng()),
        None => Vec::new(),
    };
    let latent = spec.latent_path();
    let observations = observe_path(spec.observation, &latent, &mut stream.named("phase2").rng());
    Ok(Realization {
        phase1,
        observations,
        latent,
        in_control: spec.in_control_flags(),
    })
}

fn constant(start: usize, end: usize, value: f64) -> Piece {
    Piece::Constant { start, end, value }
}

fn linear(start: usize, end: usize, origin: usize, intercept: f64, rise: f64, run: f64) -> Piece {
    Piece::Linear {
        start,
        end,
        origin,
        intercept,
        rise,
        run,
    }
}

/// In-control exponential rate in the time-between-failure studies.
pub const THETA0: f64 = 10.0;

fn exp_phase1(m: usize, contamination: f64) -> Option<Phase1Spec> {
    Some(Phase1Spec {
        size: m,
        value: THETA0,
        contamination,
        contaminant: 40.0,
    })
}

/// Exp(10) for 1..=100, Exp(40) for 101..=200.
pub fn single_change(m: usize) -> ScenarioSpec {
    ScenarioSpec {
        name: "single-change-exp".into(),
        horizon: 200,
        latent: vec![constant(1, 100, THETA0), constant(101, 200, 40.0)],
        observation: ObservationModel::Exponential,
        phase1: exp_phase1(m, 0.0),
        ooc_windows: vec![(101, 200)],
    }
}

/// Rates `r1`/10/`r2` after an initial in-control block, changing at 50, 100 and 150.
pub fn recoverable_with(name: &str, m: usize, contamination: f64, first: Piece, second_rate: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        horizon: 200,
        latent: vec![
            constant(1, 50, THETA0),
            first,
            constant(101, 150, THETA0),
            constant(151, 200, second_rate),
        ],
        observation: ObservationModel::Exponential,
        phase1: exp_phase1(m, contamination),
        ooc_windows: vec![(51, 100), (151, 200)],
    }
}

pub fn recoverable(m: usize) -> ScenarioSpec {
    recoverable_with("recoverable-exp", m, 0.0, constant(51, 100, 40.0), 50.0)
}

pub fn contaminated(m: usize, eps: f64) -> ScenarioSpec {
    recoverable_with("contaminated-exp", m, eps, constant(51, 100, 40.0), 50.0)
}

/// Rate rising linearly from 10 to 40 over 51..=100.
pub fn ramp(m: usize) -> ScenarioSpec {
    recoverable_with("ramp-exp", m, 0.0, linear(51, 100, 50, THETA0, 30.0, 50.0), 50.0)
}

/// Out-of-control rate 5 in both out-of-control segments.
pub fn wrong_direction(m: usize) -> ScenarioSpec {
    recoverable_with("wrong-direction-exp", m, 0.0, constant(51, 100, 5.0), 5.0)
}

/// Gaussian drift and recovery; unacceptable (outside [-0.5, 0.5]) on 78..=157.
pub fn gaussian_drift() -> ScenarioSpec {
    ScenarioSpec {
        name: "gaussian-drift".into(),
        horizon: 200,
        latent: vec![
            constant(1, 50, 0.0),
            linear(51, 100, 50, 0.0, 0.9, 50.0),
            constant(101, 140, 0.9),
            linear(141, 180, 140, 0.9, -0.9, 40.0),
            constant(181, 200, 0.0),
        ],
        observation: ObservationModel::Gaussian { sd: 0.15 },
        phase1: None,
        ooc_windows: vec![(78, 157)],
    }
}

/// Drifting Binomial defect probability; unacceptable (above 0.02) on 71..=183.
pub fn binomial_drift() -> ScenarioSpec {
    ScenarioSpec {
        name: "binomial-drift".into(),
        horizon: 200,
        latent: vec![
            constant(1, 50, 0.01),
            linear(51, 110, 50, 0.01, 0.03, 60.0),
            constant(111, 150, 0.04),
            linear(151, 200, 150, 0.04, -0.03, 50.0),
        ],
        observation: ObservationModel::Binomial { trials: 500 },
        phase1: Some(Phase1Spec {
            size: 50,
            value: 0.01,
            contamination: 0.0,
            contaminant: 0.01,
        }),
        ooc_windows: vec![(71, 183)],
    }
}

/// Defect counts switching 0.01 / 0.015 / 0.01 / 0.02 at 50, 100 and 150.
pub fn binomial_example() -> ScenarioSpec {
    ScenarioSpec {
        name: "binomial-example".into(),
        horizon: 200,
        latent: vec![
            constant(1, 50, 0.01),
            constant(51, 100, 0.015),
            constant(101, 150, 0.01),
            constant(151, 200, 0.02),
        ],
        observation: ObservationModel::Binomial { trials: 500 },
        phase1: None,
        ooc_windows: vec![(51, 100), (151, 200)],
    }
}

pub const SCENARIO_NAMES: [&str; 9] = [
    "single-change-exp",
    "recoverable-exp",
    "contaminated5-exp",
    "contaminated10-exp",
    "ramp-exp",
    "wrong-direction-exp",
    "gaussian-drift",
    "binomial-drift",
    "binomial-example",
];

/// Named scenarios with their default Phase I sizes.
pub fn named_scenario(name: &str) -> Result<ScenarioSpec> {
    let s = match name {
        "single-change-exp" => single_change(50),
        "recoverable-exp" => recoverable(50),
        "contaminated5-exp" => contaminated(50, 0.05),
        "contaminated10-exp" => contaminated(50, 0.10),
        "ramp-exp" => ramp(50),
        "wrong-direction-exp" => wrong_direction(50),
        "gaussian-drift" => gaussian_drift(),
        "binomial-drift" => binomial_drift(),
        "binomial-example" => binomial_example(),
        _ => {
            return Err(Error::domain(format!(
                "unknown scenario '{name}'; known: {}",
                SCENARIO_NAMES.join(", ")
            )))
        }
    };
    Ok(ScenarioSpec {
        name: name.into(),
        ..s
    })
}

/// First `t` (1-based) at which `pred(theta_t)` holds.
pub fn first_time(latent: &[f64], from: usize, pred: impl Fn(f64) -> bool) -> Option<usize> {
    (from..=latent.len()).find(|&t| pred(latent[t - 1]))
}
