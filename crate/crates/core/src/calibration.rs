//! Threshold calibration by posterior-predictive simulation, the cost-based
//! threshold, and the acceptable-region radius for multivariate monitoring.
//!
//! Each calibration replicate produces one all-in-control path of the
//! monitoring statistic. Paths are stored as probabilities so that every grid
//! threshold is evaluated from the same filter run.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::mahalanobis_sq;
use crate::{Error, Result};

/// False-signal episodes and signalling timepoints of one path at threshold `delta`.
///
/// An episode starts at every transition from no signal to signal, with the
/// process treated as not signalling before the first observation.
pub fn count_false_episodes(path: &[f64], delta: f64) -> (usize, usize) {
    let mut episodes = 0;
    let mut timepoints = 0;
    let mut prev = false;
    for &p in path {
        let s = p < delta;
        if s {
            timepoints += 1;
            if !prev {
                episodes += 1;
            }
        }
        prev = s;
    }
    (episodes, timepoints)
}

/// Signalling threshold of the one-period Bayes rule with costs
/// `cost0` (signalling while in control) and `cost1` (missing an out-of-control state).
pub fn threshold_from_costs(cost0: f64, cost1: f64) -> Result<f64> {
    if !(cost0 > 0.0 && cost1 > 0.0) || !cost0.is_finite() || !cost1.is_finite() {
        return Err(Error::domain(format!("costs must be positive and finite, got ({cost0}, {cost1})")));
    }
    Ok(cost1 / (cost0 + cost1))
}

/// `{step, 2 step, ...}` strictly inside (0, 1).
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::domain(format!("grid step must lie in (0,1), got {step}")));
    }
    let n = (1.0 / step).round();
    if ((n * step) - 1.0).abs() < 1e-9 {
        // exact decimal grid points such as 97/200 = 0.485
        let n = n as usize;
        return Ok((1..n).map(|k| k as f64 / n as f64).collect());
    }
    Ok((1..).map(|k| k as f64 * step).take_while(|d| *d < 1.0).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibrationTarget {
    /// Mean episodes closest to `episodes`; ties go to the largest threshold.
    ClosestEpisodes { episodes: f64 },
    /// Mean episodes inside `[lower, upper]`, then fewest signalling timepoints.
    Band { lower: f64, upper: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta: f64,
    pub mean_episodes: f64,
    pub episodes_mcse: f64,
    pub mean_timepoints: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub delta: f64,
    pub achieved_episodes: f64,
    pub mcse: f64,
    pub mean_timepoints: f64,
    pub replicates: usize,
    pub target: CalibrationTarget,
    /// False when the band was empty and `delta` is the nearest miss.
    pub attained: bool,
    pub grid: Vec<f64>,
    pub curve: Vec<CurvePoint>,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("threshold grid is empty"));
    }
    if grid.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::domain("grid thresholds must lie in (0,1)"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("grid must be strictly ascending"));
    }
    Ok(())
}

/// Evaluate every grid threshold on stored paths and select one.
pub fn calibrate_from_paths(paths: &[Vec<f64>], grid: &[f64], target: CalibrationTarget) -> Result<CalibrationResult> {
    validate_grid(grid)?;
    if paths.is_empty() {
        return Err(Error::domain("calibration needs at least one path"));
    }
    if let CalibrationTarget::Band { lower, upper } = target {
        if !(lower <= upper) {
            return Err(Error::domain(format!("band bounds out of order: [{lower}, {upper}]")));
        }
    }
    let b = paths.len() as f64;
    let curve: Vec<CurvePoint> = grid
        .par_iter()
        .map(|&delta| {
            let (mut s, mut ss, mut tp) = (0.0, 0.0, 0.0);
            for p in paths {
                let (e, t) = count_false_episodes(p, delta);
                let e = e as f64;
                s += e;
                ss += e * e;
                tp += t as f64;
            }
            let mean = s / b;
            let var = if paths.len() > 1 {
                ((ss - b * mean * mean) / (b - 1.0)).max(0.0)
            } else {
                0.0
            };
            CurvePoint {
                delta,
                mean_episodes: mean,
                episodes_mcse: (var / b).sqrt(),
                mean_timepoints: tp / b,
            }
        })
        .collect();

    let (best, attained) = select(&curve, target);
    let c = curve[best];
    let result = CalibrationResult {
        delta: c.delta,
        achieved_episodes: c.mean_episodes,
        mcse: c.episodes_mcse,
        mean_timepoints: c.mean_timepoints,
        replicates: paths.len(),
        target,
        attained,
        grid: grid.to_vec(),
        curve,
    };
    if attained {
        Ok(result)
    } else {
        Err(Error::CalibrationUnattainable(Box::new(result)))
    }
}

// Later grid points win ties, so scanning ascending with `<=` keeps the largest delta.
fn select(curve: &[CurvePoint], target: CalibrationTarget) -> (usize, bool) {
    let closest = |k: f64| {
        let mut best = 0;
        for (i, c) in curve.iter().enumerate() {
            if (c.mean_episodes - k).abs() <= (curve[best].mean_episodes - k).abs() {
                best = i;
            }
        }
        best
    };
    match target {
        CalibrationTarget::ClosestEpisodes { episodes } => (closest(episodes), true),
        CalibrationTarget::Band { lower, upper } => {
            let mut best: Option<usize> = None;
            for (i, c) in curve.iter().enumerate() {
                if c.mean_episodes >= lower && c.mean_episodes <= upper {
                    match best {
                        Some(b) if curve[b].mean_timepoints < c.mean_timepoints => {}
                        _ => best = Some(i),
                    }
                }
            }
            match best {
                Some(i) => (i, true),
                None => {
                    let mut miss = 0;
                    let dist = |c: &CurvePoint| (lower - c.mean_episodes).max(c.mean_episodes - upper);
                    for (i, c) in curve.iter().enumerate() {
                        if dist(c) <= dist(&curve[miss]) {
                            miss = i;
                        }
                    }
                    (miss, false)
                }
            }
        }
    }
}

/// Generate `b_cal` paths in parallel (`generator(i)` must derive its own
/// randomness from the replicate index) and calibrate on them.
pub fn calibrate_threshold<G>(
    generator: G,
    b_cal: usize,
    grid: &[f64],
    target: CalibrationTarget,
) -> Result<CalibrationResult>
where
    G: Fn(usize) -> Result<Vec<f64>> + Send + Sync,
{
    if b_cal == 0 {
        return Err(Error::domain("calibration needs at least one replicate"));
    }
    validate_grid(grid)?;
    let paths = (0..b_cal).into_par_iter().map(&generator).collect::<Result<Vec<_>>>()?;
    calibrate_from_paths(&paths, grid, target)
}

/// `sorted[ceil(q n) - 1]`: the smallest value with at least a fraction `q` of
/// the sample at or below it.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("quantile of an empty sample"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0,1), got {q}")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(v[k - 1])
}

/// Means of `n_boot` blocks of `block` rows drawn with replacement from `pool`.
pub fn bootstrap_block_means<R: Rng + ?Sized>(
    pool: &[Vec<f64>],
    block: usize,
    n_boot: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if pool.is_empty() || block == 0 {
        return Err(Error::domain("bootstrap needs a nonempty pool and a positive block size"));
    }
    let d = pool[0].len();
    Ok((0..n_boot)
        .map(|_| {
            let mut m = vec![0.0; d];
            for _ in 0..block {
                let row = &pool[rng.random_range(0..pool.len())];
                for (acc, v) in m.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            m.iter_mut().for_each(|v| *v /= block as f64);
            m
        })
        .collect())
}

/// Empirical `quantile` of squared Mahalanobis distances of block means from `center`.
pub fn radius_from_block_means(
    block_means: &[Vec<f64>],
    center: &[f64],
    inverse: &DMatrix<f64>,
    quantile: f64,
) -> Result<f64> {
    let d2 = block_means
        .iter()
        .map(|m| mahalanobis_sq(m, center, inverse))
        .collect::<Result<Vec<_>>>()?;
    empirical_quantile(&d2, quantile)
}

/// Region radius from bootstrap block means of in-control reference rows.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_region_radius<R: Rng + ?Sized>(
    pool: &[Vec<f64>],
    block: usize,
    n_boot: usize,
    center: &[f64],
    inverse: &DMatrix<f64>,
    quantile: f64,
    rng: &mut R,
) -> Result<f64> {
    if n_boot == 0 {
        return Err(Error::domain("need at least one bootstrap replicate"));
    }
    if pool.len() < 2 {
        return Err(Error::Data("reference pool needs at least two rows".into()));
    }
    let d = pool[0].len();
    for j in 0..d {
        let first = pool[0][j];
        if pool.iter().all(|r| r[j] == first) {
            return Err(Error::Data(format!("reference coordinate {j} has zero variance")));
        }
    }
    let means = bootstrap_block_means(pool, block, n_boot, rng)?;
    radius_from_block_means(&means, center, inverse, quantile)
}
