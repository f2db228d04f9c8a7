//! Multivariate pseudo-monitoring on the white wine quality data.
//!
//! Quality 7 is acceptable production and quality 6 is degraded. The
//! quality-7 rows are shuffled under a split seed and cut 440/220/220 into
//! reference, calibration and test pools.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{bootstrap_block_means, calibrate_from_paths, calibrate_region_radius, threshold_grid, CalibrationResult, CalibrationTarget};
use crate::covariance::{column_means, mahalanobis_sq, sample_covariance, shrink_covariance};
use crate::format::{g17, TextTable};
use crate::metrics::{aggregate, score_run, AggregateTable, ScoreSpec};
use crate::rng::RngStream;
use crate::tracking::{pf_init, AcceptableRegion, MultivariateGaussianWalk, RunDiagnostics};
use crate::{Error, Result};

pub const FEATURES: [&str; 11] = [
    "fixed acidity",
    "volatile acidity",
    "citric acid",
    "residual sugar",
    "chlorides",
    "free sulfur dioxide",
    "total sulfur dioxide",
    "density",
    "pH",
    "sulphates",
    "alcohol",
];

#[derive(Clone, Debug, PartialEq)]
pub struct WineData {
    pub features: Vec<Vec<f64>>,
    pub quality: Vec<u32>,
}

/// Parse the semicolon-delimited file with a header of 11 feature names and `quality`.
/// Errors name the 1-based line.
pub fn parse_wine(text: &str) -> Result<WineData> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b';')
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Data(format!("line 1: {e}")))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let expected: Vec<&str> = FEATURES.iter().copied().chain(["quality"]).collect();
    if names != expected {
        return Err(Error::Data(format!(
            "line 1: expected {} columns {:?}, got {:?}",
            expected.len(),
            expected,
            names
        )));
    }
    let mut data = WineData {
        features: Vec::new(),
        quality: Vec::new(),
    };
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        if rec.len() != 12 {
            return Err(Error::Data(format!("line {line}: expected 12 fields, got {}", rec.len())));
        }
        let mut x = Vec::with_capacity(11);
        for (j, f) in rec.iter().take(11).enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("line {line}: column '{}' is not a number: {f:?}", FEATURES[j])))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("line {line}: column '{}' is not finite", FEATURES[j])));
            }
            x.push(v);
        }
        let q: u32 = rec[11]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: quality is not an integer: {:?}", &rec[11])))?;
        data.features.push(x);
        data.quality.push(q);
    }
    Ok(data)
}

pub fn read_wine(path: &Path) -> Result<WineData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parse_wine(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WineConfig {
    pub split_seed: u64,
    pub reference_size: usize,
    pub calibration_size: usize,
    pub test_size: usize,
    pub rho: f64,
    pub block: usize,
    pub bootstrap: usize,
    pub region_quantile: f64,
    pub c_theta: f64,
    pub particles: usize,
    pub resample_frac: f64,
    pub band: (f64, f64),
    pub calibration_sequences: usize,
    pub calibration_length: usize,
    pub evaluation_sequences: usize,
    pub segment: usize,
    pub grid_step: f64,
}

impl Default for WineConfig {
    fn default() -> Self {
        Self {
            split_seed: 1,
            reference_size: 440,
            calibration_size: 220,
            test_size: 220,
            rho: 0.05,
            block: 10,
            bootstrap: 5000,
            region_quantile: 0.95,
            c_theta: 0.2,
            particles: 5000,
            resample_frac: 0.5,
            band: (0.75, 1.25),
            calibration_sequences: 500,
            calibration_length: 150,
            evaluation_sequences: 1000,
            segment: 50,
            grid_step: 0.005,
        }
    }
}

/// Standardized pools.
#[derive(Clone, Debug)]
pub struct WineSplit {
    pub reference: Vec<Vec<f64>>,
    pub calibration: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub degraded: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

pub fn split_and_standardize(data: &WineData, cfg: &WineConfig) -> Result<WineSplit> {
    let mut q7: Vec<&Vec<f64>> = Vec::new();
    let mut q6: Vec<&Vec<f64>> = Vec::new();
    for (x, &q) in data.features.iter().zip(&data.quality) {
        match q {
            7 => q7.push(x),
            6 => q6.push(x),
            _ => {}
        }
    }
    let need = cfg.reference_size + cfg.calibration_size + cfg.test_size;
    if q7.len() < need {
        return Err(Error::Data(format!("need {need} quality-7 rows, found {}", q7.len())));
    }
    if q6.len() < cfg.block.max(1) {
        return Err(Error::Data(format!("need at least {} quality-6 rows, found {}", cfg.block, q6.len())));
    }
    q7.shuffle(&mut RngStream::root(cfg.split_seed).named("wine-split").rng());
    let (r, rest) = q7.split_at(cfg.reference_size);
    let (c, rest) = rest.split_at(cfg.calibration_size);
    let t = &rest[..cfg.test_size];
    let reference: Vec<Vec<f64>> = r.iter().map(|x| (*x).clone()).collect();
    let mean = column_means(&reference);
    let sd: Vec<f64> = (0..mean.len())
        .map(|j| {
            let ss: f64 = reference.iter().map(|x| (x[j] - mean[j]).powi(2)).sum();
            (ss / (reference.len() - 1) as f64).sqrt()
        })
        .collect();
    if let Some(j) = sd.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Data(format!("reference column '{}' has zero variance", FEATURES[j])));
    }
    let z = |x: &Vec<f64>| -> Vec<f64> { x.iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect() };
    Ok(WineSplit {
        reference: reference.iter().map(z).collect(),
        calibration: c.iter().map(|x| z(x)).collect(),
        test: t.iter().map(|x| z(x)).collect(),
        degraded: q6.iter().map(|x| z(x)).collect(),
        mean: mean.clone(),
        sd,
    })
}

#[derive(Clone, Debug)]
pub struct WineReport {
    pub cond_raw: f64,
    pub cond_shrunk: f64,
    pub c_a: f64,
    /// Fractions of bootstrap block means outside the region.
    pub exceed_test: f64,
    pub exceed_degraded: f64,
    /// Squared distances of the static-check block means (histogram data).
    pub test_distances: Vec<f64>,
    pub degraded_distances: Vec<f64>,
    pub calibration: CalibrationResult,
    pub metrics: AggregateTable,
    pub mean_ess: f64,
    pub resample_fraction: f64,
    /// `P(theta_t in A | y_1..y_t)` for the first evaluation sequence.
    pub example_path: Vec<f64>,
}

struct Monitor {
    model: MultivariateGaussianWalk,
    region: AcceptableRegion,
}

impl Monitor {
    fn run(&self, seq: &[&[f64]], particles: usize, frac: f64, stream: RngStream) -> Result<(Vec<f64>, RunDiagnostics)> {
        let mut pf = pf_init(self.model.clone(), self.region.clone(), particles, frac, stream)?;
        let mut p = Vec::with_capacity(seq.len());
        for y in seq {
            p.push(pf.step(y)?.p_region);
        }
        Ok((p, pf.diagnostics()))
    }
}

fn draw_from<'a, R: Rng>(pool: &'a [Vec<f64>], n: usize, rng: &mut R, out: &mut Vec<&'a [f64]>) {
    for _ in 0..n {
        out.push(&pool[rng.random_range(0..pool.len())]);
    }
}

fn exceedance(means: &[Vec<f64>], center: &[f64], inverse: &DMatrix<f64>, c_a: f64) -> Result<(f64, Vec<f64>)> {
    let d = means.iter().map(|m| mahalanobis_sq(m, center, inverse)).collect::<Result<Vec<_>>>()?;
    let frac = d.iter().filter(|&&v| v > c_a).count() as f64 / d.len() as f64;
    Ok((frac, d))
}

/// Full pipeline: region, static check, band calibration and evaluation.
pub fn wine_pipeline(data: &WineData, cfg: &WineConfig, seed: u64) -> Result<WineReport> {
    let split = split_and_standardize(data, cfg)?;
    let root = RngStream::root(seed).named("wine");
    let raw = sample_covariance(&split.reference)?;
    let cov = shrink_covariance(&raw, cfg.rho)?;
    let center = column_means(&split.reference);
    let c_a = calibrate_region_radius(
        &split.calibration,
        cfg.block,
        cfg.bootstrap,
        &center,
        &cov.inverse,
        cfg.region_quantile,
        &mut root.named("radius").rng(),
    )?;
    let test_means = bootstrap_block_means(&split.test, cfg.block, cfg.bootstrap, &mut root.named("static-test").rng())?;
    let deg_means = bootstrap_block_means(&split.degraded, cfg.block, cfg.bootstrap, &mut root.named("static-degraded").rng())?;
    let (exceed_test, test_distances) = exceedance(&test_means, &center, &cov.inverse, c_a)?;
    let (exceed_degraded, degraded_distances) = exceedance(&deg_means, &center, &cov.inverse, c_a)?;

    let b = cfg.block as f64;
    let init = &cov.shrunk / b;
    let monitor = Monitor {
        model: MultivariateGaussianWalk::new(center.clone(), &init, &(&init * cfg.c_theta), &cov.shrunk)?,
        region: AcceptableRegion::ellipsoid(center.clone(), cov.inverse.clone(), c_a.sqrt())?,
    };

    let acceptable: Vec<Vec<f64>> = split.calibration.iter().chain(&split.test).cloned().collect();
    let cal_root = root.named("calibration");
    let cal_paths: Vec<Vec<f64>> = (0..cfg.calibration_sequences)
        .into_par_iter()
        .map(|i| {
            let s = cal_root.index(i as u64);
            let mut seq = Vec::with_capacity(cfg.calibration_length);
            draw_from(&acceptable, cfg.calibration_length, &mut s.named("draw").rng(), &mut seq);
            Ok(monitor.run(&seq, cfg.particles, cfg.resample_frac, s.named("pf"))?.0)
        })
        .collect::<Result<_>>()?;
    let grid = threshold_grid(cfg.grid_step)?;
    let calibration = calibrate_from_paths(
        &cal_paths,
        &grid,
        CalibrationTarget::Band {
            lower: cfg.band.0,
            upper: cfg.band.1,
        },
    )?;

    let eval_root = root.named("evaluation");
    let seg = cfg.segment;
    let runs: Vec<(Vec<f64>, RunDiagnostics)> = (0..cfg.evaluation_sequences)
        .into_par_iter()
        .map(|i| {
            let s = eval_root.index(i as u64);
            let mut rng = s.named("draw").rng();
            let mut seq = Vec::with_capacity(3 * seg);
            draw_from(&split.test, seg, &mut rng, &mut seq);
            draw_from(&split.degraded, seg, &mut rng, &mut seq);
            draw_from(&split.test, seg, &mut rng, &mut seq);
            monitor.run(&seq, cfg.particles, cfg.resample_frac, s.named("pf"))
        })
        .collect::<Result<_>>()?;
    let spec = ScoreSpec {
        horizon: 3 * seg,
        ..degraded_spec(seg)
    };
    let scored = runs
        .iter()
        .map(|(p, _)| score_run(p, calibration.delta, &spec))
        .collect::<Result<Vec<_>>>()?;
    let mut diag = RunDiagnostics::default();
    for (_, d) in &runs {
        diag.steps += d.steps;
        diag.resamples += d.resamples;
        diag.ess_sum += d.ess_sum;
    }
    Ok(WineReport {
        cond_raw: cov.cond_raw,
        cond_shrunk: cov.cond_shrunk,
        c_a,
        exceed_test,
        exceed_degraded,
        test_distances,
        degraded_distances,
        metrics: aggregate("wine", &spec, &scored),
        calibration,
        mean_ess: diag.mean_ess(),
        resample_fraction: diag.resample_fraction(),
        example_path: runs.first().map(|r| r.0.clone()).unwrap_or_default(),
    })
}

fn degraded_spec(seg: usize) -> ScoreSpec {
    if seg == 50 {
        return ScoreSpec::degraded_block();
    }
    let mut s = ScoreSpec::degraded_block();
    s.events[0].window = (seg + 1, 2 * seg);
    s.events[0].origin = seg;
    s.events[1].window = (2 * seg + 1, 3 * seg);
    s.events[1].origin = 2 * seg;
    s.false_windows = vec![(1, seg)];
    s.transition = Some(seg);
    s
}

impl WineReport {
    pub fn to_table(&self) -> TextTable {
        let mut t = TextTable::new(["quantity", "value", "mcse"]);
        let mut row = |name: &str, v: f64, se: f64| t.push(vec![name.into(), g17(v), g17(se)]);
        let nan = f64::NAN;
        row("condition_number_raw", self.cond_raw, nan);
        row("condition_number_shrunk", self.cond_shrunk, nan);
        row("c_A", self.c_a, nan);
        row("exceed_quality7_test", self.exceed_test, nan);
        row("exceed_quality6", self.exceed_degraded, nan);
        row("delta", self.calibration.delta, nan);
        row("calibration_episodes", self.calibration.achieved_episodes, self.calibration.mcse);
        row("calibration_timepoints", self.calibration.mean_timepoints, nan);
        for d in &self.metrics.delays {
            row(&d.name, d.delay.mean, d.delay.mcse);
            row(&format!("{}_miss", d.name), d.miss_rate(), nan);
        }
        row("false_episodes", self.metrics.false_episodes.mean, self.metrics.false_episodes.mcse);
        row("false_timepoints", self.metrics.false_timepoints.mean, self.metrics.false_timepoints.mcse);
        row("signaling_at_transition", self.metrics.signaling_at_transition, nan);
        row("mean_ess", self.mean_ess, nan);
        row("resample_fraction", self.resample_fraction, nan);
        t
    }

    /// Histogram of the static-check distances on a common grid of `bins` bins.
    pub fn histogram(&self, bins: usize) -> TextTable {
        let hi = self
            .test_distances
            .iter()
            .chain(&self.degraded_distances)
            .copied()
            .fold(self.c_a, f64::max);
        let width = hi / bins.max(1) as f64;
        let count = |d: &[f64]| {
            let last = bins.max(1) - 1;
            let mut c = vec![0usize; last + 1];
            for &v in d {
                c[((v / width) as usize).min(last)] += 1;
            }
            c
        };
        let (a, b) = (count(&self.test_distances), count(&self.degraded_distances));
        let mut t = TextTable::new(["lower", "upper", "quality7", "quality6"]);
        for i in 0..a.len() {
            t.push(vec![
                g17(i as f64 * width),
                g17((i + 1) as f64 * width),
                a[i].to_string(),
                b[i].to_string(),
            ]);
        }
        t
    }
}
