//! TOML monitor configuration.
//!
//! ```toml
//! version = 1
//!
//! [model]
//! family = "exponential-gamma"
//! out_of_control = { mean = 40.0, sd = 10.0 }
//!
//! [model.reference]
//! kind = "phase1"
//! file = "phase1.csv"
//! prior = { mean = 10.0, sd = 3.0 }
//!
//! [durations]
//! in_control_mean = 200.0
//! out_of_control_mean = 200.0
//!
//! [threshold]
//! delta = 0.485
//! ```

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::Failure;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[allow(dead_code)] // checked in `parse` before deserialising
    pub version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub durations: Durations,
    #[serde(default)]
    pub threshold: Threshold,
    #[serde(default)]
    pub filter: FilterSettings,
    #[serde(default)]
    pub particles: PfSettings,
    pub region: Option<RegionSpec>,
    #[serde(default)]
    pub calibration: CalibrationSettings,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelSpec {
    ExponentialGamma {
        reference: Reference,
        out_of_control: Prior,
    },
    BinomialBeta {
        trials: u64,
        reference: Reference,
        out_of_control: Prior,
    },
    Gaussian {
        obs_sd: f64,
        reference: Reference,
        out_of_control: Prior,
    },
    /// Scalar random-walk tracking; binomial regions are given on the probability scale.
    TrackingPf {
        observation: TrackedObservation,
        state_sd: f64,
        obs_sd: Option<f64>,
        trials: Option<u64>,
        initial: Prior,
    },
    Multivariate {
        initial_mean: Vec<f64>,
        initial_cov: Vec<Vec<f64>>,
        transition_cov: Vec<Vec<f64>>,
        obs_cov: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum TrackedObservation {
    Gaussian,
    Binomial,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reference {
    Point { value: f64 },
    Phase1 { file: PathBuf, prior: Prior },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Prior {
    MeanSd { mean: f64, sd: f64 },
    Beta { a: f64, b: f64 },
    Gamma { shape: f64, rate: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Durations {
    pub in_control_mean: f64,
    pub out_of_control_mean: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Self {
            in_control_mean: 200.0,
            out_of_control_mean: 200.0,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub delta: Option<f64>,
    pub calibration_record: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    pub prune_tol: f64,
    pub absorbing: bool,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfSettings {
    pub count: usize,
    pub resample_frac: f64,
}

impl Default for PfSettings {
    fn default() -> Self {
        Self {
            count: 5000,
            resample_frac: 0.5,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSpec {
    Interval { lower: f64, upper: f64 },
    AtMost { bound: f64 },
    AtLeast { bound: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `(x - center)' shape^-1 (x - center) <= radius_sq`.
    Ellipsoid { center: Vec<f64>, shape: Vec<Vec<f64>>, radius_sq: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub horizon: usize,
    pub replicates: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            horizon: 200,
            replicates: 1000,
        }
    }
}

/// A parsed configuration with the directory its relative paths refer to.
pub struct Loaded {
    pub config: Config,
    pub text: String,
    pub base: PathBuf,
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let config = parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(Loaded {
        config,
        text,
        base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn parse(text: &str) -> Result<Config, String> {
    let table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    match table.get("version") {
        None => return Err(format!("missing `version` (expected version = {CONFIG_VERSION})")),
        Some(toml::Value::Integer(v)) if *v == CONFIG_VERSION as i64 => {}
        Some(v) => return Err(format!("unsupported config version {v} (expected {CONFIG_VERSION})")),
    }
    table.try_into().map_err(|e: toml::de::Error| e.to_string())
}

pub fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>, Failure> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Failure::Usage(format!("{name} must be a nonempty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
