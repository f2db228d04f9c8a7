//! Replication drivers for the simulation and tracking studies.
//!
//! Every replicate derives its randomness from `root.named(study).index(i)`,
//! so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_threshold, CalibrationResult, CalibrationTarget};
use crate::conjugate::{
    BetaAB, BinomialBeta, Dist, ExponentialGamma, GammaShapeRate, InControlReference,
};
use crate::format::{g17, TextTable};
use crate::kalman::KalmanState;
use crate::metrics::{aggregate, score_run, AggregateTable, MeanStat, ScoreSpec};
use crate::recoverable::{p_ic_path, DurationPrior, FilterConfig};
use crate::rng::RngStream;
use crate::scenario::{
    self, generate_scenario, observe_path, phase1_sample, ObservationModel, Phase1Spec, ScenarioSpec,
};
use crate::special::logit;
use crate::tracking::{
    pf_init, AcceptableRegion, GaussianRandomWalk, LogitBinomialWalk, LogitInit, RegimeParticleFilter,
    RunDiagnostics, Side,
};
use crate::Result;

/// Replicate count scaled for quick runs (at least one).
pub fn scaled(n: usize, scale: f64) -> usize {
    ((n as f64 * scale).round() as usize).max(1)
}

/// Threshold selected by the baseline calibration and used for the fixed-threshold studies.
pub const BASELINE_DELTA: f64 = 0.485;
/// Geometric duration parameter of both regimes in the time-between-failure studies.
pub const DURATION_P: f64 = 1.0 / 200.0;
pub const HORIZON: usize = 200;

/// Prior configuration of the Exponential-Gamma studies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpPriors {
    pub mu0: f64,
    pub sigma0: f64,
    pub m: usize,
    pub mu1: f64,
    pub sigma1: f64,
}

impl ExpPriors {
    pub const BASELINE: ExpPriors = ExpPriors {
        mu0: 10.0,
        sigma0: 3.0,
        m: 50,
        mu1: 40.0,
        sigma1: 10.0,
    };

    pub fn in_control_prior(&self) -> Result<GammaShapeRate> {
        GammaShapeRate::from_mean_sd(self.mu0, self.sigma0)
    }

    pub fn ooc_prior(&self) -> Result<GammaShapeRate> {
        GammaShapeRate::from_mean_sd(self.mu1, self.sigma1)
    }

    fn phase1(&self) -> Phase1Spec {
        Phase1Spec {
            size: self.m,
            value: scenario::THETA0,
            contamination: 0.0,
            contaminant: 40.0,
        }
    }
}

/// Prior rows of the sensitivity study.
pub const TABLE2_ROWS: [ExpPriors; 8] = [
    ExpPriors::BASELINE,
    ExpPriors { mu1: 20.0, ..ExpPriors::BASELINE },
    ExpPriors { mu1: 100.0, ..ExpPriors::BASELINE },
    ExpPriors { mu1: 60.0, ..ExpPriors::BASELINE },
    ExpPriors { mu0: 15.0, sigma0: 5.0, ..ExpPriors::BASELINE },
    ExpPriors { mu0: 15.0, sigma0: 5.0, m: 5, ..ExpPriors::BASELINE },
    ExpPriors { mu0: 1000.0, sigma0: 10000.0, ..ExpPriors::BASELINE },
    ExpPriors { mu0: 1000.0, sigma0: 10000.0, m: 5, ..ExpPriors::BASELINE },
];

/// Filter configuration with the Phase I posterior as in-control reference.
pub fn exp_filter(reference: GammaShapeRate, priors: &ExpPriors, delta: f64) -> Result<FilterConfig<ExponentialGamma>> {
    let model = ExponentialGamma {
        reference: InControlReference::Posterior(reference),
        ooc_prior: priors.ooc_prior()?,
    };
    Ok(FilterConfig::new(
        model,
        DurationPrior::geometric(DURATION_P)?,
        DurationPrior::geometric(DURATION_P)?,
        delta,
    ))
}

/// One pre-posterior calibration path: fresh Phase I, rate drawn from its
/// posterior, 200 in-control observations at that rate.
pub fn exp_calibration_path(priors: &ExpPriors, stream: RngStream) -> Result<Vec<f64>> {
    let x = phase1_sample(&priors.phase1(), ObservationModel::Exponential, &mut stream.named("phase1").rng());
    let post = priors.in_control_prior()?.update(&x)?;
    let theta = Dist::Gamma(post).draw(&mut stream.named("theta").rng());
    let ys = observe_path(ObservationModel::Exponential, &vec![theta; HORIZON], &mut stream.named("phase2").rng());
    p_ic_path(&exp_filter(post, priors, BASELINE_DELTA)?, &ys)
}

pub fn calibrate_exp(priors: &ExpPriors, b_cal: usize, grid: &[f64], stream: RngStream) -> Result<CalibrationResult> {
    calibrate_threshold(
        |i| exp_calibration_path(priors, stream.index(i as u64)),
        b_cal,
        grid,
        CalibrationTarget::ClosestEpisodes { episodes: 1.0 },
    )
}

/// `p_IC` path for one replicate of an Exponential scenario.
pub fn exp_scenario_path(spec: &ScenarioSpec, priors: &ExpPriors, stream: RngStream) -> Result<Vec<f64>> {
    let r = generate_scenario(spec, stream)?;
    let post = priors.in_control_prior()?.update(&r.phase1)?;
    p_ic_path(&exp_filter(post, priors, BASELINE_DELTA)?, &r.observations)
}

pub fn exp_scenario_paths(spec: &ScenarioSpec, priors: &ExpPriors, b: usize, stream: RngStream) -> Result<Vec<Vec<f64>>> {
    (0..b)
        .into_par_iter()
        .map(|i| exp_scenario_path(spec, priors, stream.index(i as u64)))
        .collect()
}

/// Score stored paths at one threshold.
pub fn evaluate_paths(label: &str, paths: &[Vec<f64>], delta: f64, spec: &ScoreSpec) -> Result<AggregateTable> {
    let runs = paths.iter().map(|p| score_run(p, delta, spec)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(label, spec, &runs))
}

fn delay_header(names: &[&str]) -> Vec<String> {
    let mut h = Vec::new();
    for n in names {
        h.push(n.to_string());
        h.push(format!("{n}_mcse"));
        h.push(format!("{n}_miss"));
    }
    h
}

fn delay_cells(agg: &AggregateTable, names: &[&str]) -> Vec<String> {
    let mut c = Vec::new();
    for n in names {
        match agg.delay(n) {
            Some(d) => {
                c.push(g17(d.delay.mean));
                c.push(g17(d.delay.mcse));
                c.push(g17(d.miss_rate()));
            }
            None => c.extend(["NA".to_string(), "NA".to_string(), "NA".to_string()]),
        }
    }
    c
}

fn mean_cells(s: &MeanStat) -> [String; 2] {
    [g17(s.mean), g17(s.mcse)]
}

fn scenario_header() -> Vec<String> {
    let mut h = vec!["scenario".to_string(), "delta".into(), "replicates".into()];
    h.extend(delay_header(&["d1", "d2", "d3"]));
    h.extend(["F".to_string(), "F_mcse".into()]);
    h
}

pub const FIGURE1_HEADER: [&str; 5] = ["t", "y", "theta", "p_ic", "signal"];

/// Column names of a reproduced table, in output order.
pub fn table_header(id: &str) -> Option<Vec<String>> {
    Some(match id {
        "table1" | "table3" => scenario_header(),
        "table2" => table2_header(),
        "table4" => table4_header(),
        "table5" => table5_header(),
        "fig1" => FIGURE1_HEADER.map(String::from).to_vec(),
        _ => return None,
    })
}

// ---------------------------------------------------------------- Table 1

#[derive(Clone, Debug)]
pub struct Table1 {
    pub delta: f64,
    pub single: AggregateTable,
    pub recoverable: AggregateTable,
}

pub fn table1(scale: f64, seed: u64, delta: f64) -> Result<Table1> {
    let root = RngStream::root(seed).named("table1");
    let b = scaled(1000, scale);
    let pr = ExpPriors::BASELINE;
    let single = exp_scenario_paths(&scenario::single_change(pr.m), &pr, b, root.named("single"))?;
    let recov = exp_scenario_paths(&scenario::recoverable(pr.m), &pr, b, root.named("recoverable"))?;
    Ok(Table1 {
        delta,
        single: evaluate_paths("single-change", &single, delta, &ScoreSpec::single_change())?,
        recoverable: evaluate_paths("recoverable", &recov, delta, &ScoreSpec::recoverable())?,
    })
}

impl Table1 {
    pub fn to_table(&self) -> TextTable {
        let names = ["d1", "d2", "d3"];
        let mut t = TextTable::new(scenario_header());
        for a in [&self.single, &self.recoverable] {
            let mut r = vec![a.label.clone(), g17(self.delta), a.replicates.to_string()];
            r.extend(delay_cells(a, &names));
            r.extend(mean_cells(&a.false_episodes));
            t.push(r);
        }
        t
    }
}

// ---------------------------------------------------------------- Table 2

#[derive(Clone, Debug)]
pub struct Table2Row {
    pub row: usize,
    pub priors: ExpPriors,
    pub calibration: CalibrationResult,
    pub metrics: AggregateTable,
}

/// One prior-sensitivity row: calibrate (1000 replicates for the baseline
/// row, 500 otherwise), then evaluate 1000 recoverable sequences.
pub fn table2_row(row: usize, scale: f64, seed: u64, grid: &[f64]) -> Result<Table2Row> {
    let priors = TABLE2_ROWS[row - 1];
    let root = RngStream::root(seed).named("table2").index(row as u64);
    let b_cal = scaled(if row == 1 { 1000 } else { 500 }, scale);
    let calibration = calibrate_exp(&priors, b_cal, grid, root.named("calibration"))?;
    let paths = exp_scenario_paths(
        &scenario::recoverable(priors.m),
        &priors,
        scaled(1000, scale),
        root.named("evaluation"),
    )?;
    let metrics = evaluate_paths(&format!("row{row}"), &paths, calibration.delta, &ScoreSpec::recoverable())?;
    Ok(Table2Row {
        row,
        priors,
        calibration,
        metrics,
    })
}

pub fn table2(scale: f64, seed: u64, grid: &[f64]) -> Result<Vec<Table2Row>> {
    (1..=TABLE2_ROWS.len()).map(|r| table2_row(r, scale, seed, grid)).collect()
}

fn table2_header() -> Vec<String> {
    let mut h: Vec<String> = ["row", "mu0", "sigma0", "m", "mu1", "sigma1", "delta", "F_cal", "F_cal_mcse", "b_cal"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(delay_header(&["d1", "d2", "d3"]));
    h.extend(["F".to_string(), "F_mcse".into()]);
    h
}

pub fn table2_text(rows: &[Table2Row]) -> TextTable {
    let names = ["d1", "d2", "d3"];
    let mut t = TextTable::new(table2_header());
    for r in rows {
        let p = r.priors;
        let mut c = vec![
            r.row.to_string(),
            g17(p.mu0),
            g17(p.sigma0),
            p.m.to_string(),
            g17(p.mu1),
            g17(p.sigma1),
            g17(r.calibration.delta),
            g17(r.calibration.achieved_episodes),
            g17(r.calibration.mcse),
            r.calibration.replicates.to_string(),
        ];
        c.extend(delay_cells(&r.metrics, &names));
        c.extend(mean_cells(&r.metrics.false_episodes));
        t.push(c);
    }
    t
}

// ---------------------------------------------------------------- Table 3

/// Operating-envelope rows at a fixed threshold. Rows share replicate
/// streams, so they differ only through the scenario.
pub fn table3(scale: f64, seed: u64, delta: f64) -> Result<Vec<AggregateTable>> {
    let root = RngStream::root(seed).named("table3");
    let b = scaled(1000, scale);
    let pr = ExpPriors::BASELINE;
    let rows = [
        ("clean", scenario::recoverable(pr.m)),
        ("contamination-5", scenario::contaminated(pr.m, 0.05)),
        ("contamination-10", scenario::contaminated(pr.m, 0.10)),
        ("ramp", scenario::ramp(pr.m)),
        ("wrong-direction", scenario::wrong_direction(pr.m)),
    ];
    rows.iter()
        .map(|(label, spec)| {
            let paths = exp_scenario_paths(spec, &pr, b, root)?;
            evaluate_paths(label, &paths, delta, &ScoreSpec::recoverable())
        })
        .collect()
}

pub fn table3_text(rows: &[AggregateTable], delta: f64) -> TextTable {
    let names = ["d1", "d2", "d3"];
    let mut t = TextTable::new(scenario_header());
    for a in rows {
        let mut r = vec![a.label.clone(), g17(delta), a.replicates.to_string()];
        r.extend(delay_cells(a, &names));
        r.extend(mean_cells(&a.false_episodes));
        t.push(r);
    }
    t
}

// ---------------------------------------------------------------- Table 4

pub const GAUSS_STATE_SD: f64 = 0.08;
pub const GAUSS_OBS_SD: f64 = 0.15;
pub const GAUSS_INIT_SD: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct Table4Row {
    pub particles: usize,
    pub rmse_mean: f64,
    pub rmse_p: f64,
    pub mae_p: f64,
    pub q95_abs_p: f64,
    pub max_abs_p: f64,
    pub mean_ess: f64,
    pub resample_fraction: f64,
    /// Signalling diagnostics at threshold 0.5.
    pub diagnostics: AggregateTable,
}

struct PfRun {
    p: Vec<f64>,
    mean: Vec<f64>,
    diag: RunDiagnostics,
}

fn run_gaussian_pf(ys: &[f64], particles: usize, stream: RngStream) -> Result<PfRun> {
    let model = GaussianRandomWalk::new(GAUSS_STATE_SD, GAUSS_OBS_SD, 0.0, GAUSS_INIT_SD)?;
    let mut pf = pf_init(model, AcceptableRegion::interval(-0.5, 0.5)?, particles, 0.5, stream)?;
    let steps = pf.run(ys)?;
    Ok(PfRun {
        p: steps.iter().map(|s| s.p_region).collect(),
        mean: steps.iter().map(|s| s.mean).collect(),
        diag: pf.diagnostics(),
    })
}

/// Particle filter against the exact Kalman filter on the Gaussian drift scenario.
pub fn table4(scale: f64, seed: u64, particle_counts: &[usize]) -> Result<Vec<Table4Row>> {
    let root = RngStream::root(seed).named("table4");
    let b = scaled(200, scale);
    let spec = scenario::gaussian_drift();
    let per_rep: Vec<Vec<(PfRun, Vec<f64>, Vec<f64>)>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let s = root.index(i as u64);
            let r = generate_scenario(&spec, s)?;
            let mut k = KalmanState::new(0.0, GAUSS_INIT_SD * GAUSS_INIT_SD, GAUSS_STATE_SD.powi(2), GAUSS_OBS_SD.powi(2))?;
            let (mut km, mut kp) = (Vec::with_capacity(HORIZON), Vec::with_capacity(HORIZON));
            for &y in &r.observations {
                k.step(y);
                km.push(k.mean);
                kp.push(k.region_prob(-0.5, 0.5));
            }
            particle_counts
                .iter()
                .map(|&p| Ok((run_gaussian_pf(&r.observations, p, s.named("pf").index(p as u64))?, km.clone(), kp.clone())))
                .collect()
        })
        .collect::<Result<_>>()?;

    let score = ScoreSpec::tracking(78, 158, HORIZON);
    particle_counts
        .iter()
        .enumerate()
        .map(|(j, &particles)| {
            let (mut se_m, mut se_p, mut ae_p, mut n) = (0.0, 0.0, 0.0, 0usize);
            let mut abs_err = Vec::with_capacity(b * HORIZON);
            let mut diag = RunDiagnostics::default();
            let mut paths = Vec::with_capacity(b);
            for rep in &per_rep {
                let (run, km, kp) = &rep[j];
                for t in 0..run.p.len() {
                    let dm = run.mean[t] - km[t];
                    let dp = run.p[t] - kp[t];
                    se_m += dm * dm;
                    se_p += dp * dp;
                    ae_p += dp.abs();
                    abs_err.push(dp.abs());
                    n += 1;
                }
                diag.steps += run.diag.steps;
                diag.resamples += run.diag.resamples;
                diag.ess_sum += run.diag.ess_sum;
                paths.push(run.p.clone());
            }
            let nf = n as f64;
            Ok(Table4Row {
                particles,
                rmse_mean: (se_m / nf).sqrt(),
                rmse_p: (se_p / nf).sqrt(),
                mae_p: ae_p / nf,
                q95_abs_p: crate::calibration::empirical_quantile(&abs_err, 0.95)?,
                max_abs_p: abs_err.iter().copied().fold(0.0, f64::max),
                mean_ess: diag.mean_ess(),
                resample_fraction: diag.resample_fraction(),
                diagnostics: evaluate_paths(&format!("P={particles}"), &paths, 0.5, &score)?,
            })
        })
        .collect()
}

fn table4_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "particles",
        "rmse_mean",
        "rmse_pA",
        "mae_pA",
        "q95_abs_err_pA",
        "max_abs_err_pA",
        "mean_ess",
        "resample_fraction",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(delay_header(&["d1", "d2"]));
    h
}

pub fn table4_text(rows: &[Table4Row]) -> TextTable {
    let names = ["d1", "d2"];
    let mut t = TextTable::new(table4_header());
    for r in rows {
        let mut c = vec![
            r.particles.to_string(),
            g17(r.rmse_mean),
            g17(r.rmse_p),
            g17(r.mae_p),
            g17(r.q95_abs_p),
            g17(r.max_abs_p),
            g17(r.mean_ess),
            g17(r.resample_fraction),
        ];
        c.extend(delay_cells(&r.diagnostics, &names));
        t.push(c);
    }
    t
}

// ---------------------------------------------------------------- Table 5

pub const BINOM_TRIALS: u64 = 500;
pub const BINOM_STATE_SD: f64 = 0.08;
pub const BINOM_LIMIT: f64 = 0.02;

fn binomial_phase1_posterior(stream: RngStream) -> Result<BetaAB> {
    let spec = Phase1Spec {
        size: 50,
        value: 0.01,
        contamination: 0.0,
        contaminant: 0.01,
    };
    let x = phase1_sample(&spec, ObservationModel::Binomial { trials: BINOM_TRIALS }, &mut stream.named("phase1").rng());
    let counts: Vec<u64> = x.iter().map(|&v| v as u64).collect();
    BetaAB::new(1.0, 99.0)?.update(&counts, BINOM_TRIALS)
}

fn run_binomial_pf(post: BetaAB, ys: &[f64], particles: usize, stream: RngStream) -> Result<PfRun> {
    let model = LogitBinomialWalk::new(BINOM_TRIALS, BINOM_STATE_SD, LogitInit::Beta(post))?;
    let region = AcceptableRegion::half_line(logit(BINOM_LIMIT), Side::AtMost)?;
    let mut pf = pf_init(model, region, particles, 0.5, stream)?;
    let mut p = Vec::with_capacity(ys.len());
    let mut mean = Vec::with_capacity(ys.len());
    for &y in ys {
        let s = pf.step(&(y as u64))?;
        p.push(s.p_region);
        mean.push(s.mean);
    }
    Ok(PfRun {
        p,
        mean,
        diag: pf.diagnostics(),
    })
}

/// Calibration path: fresh Phase I, probability drawn from its posterior,
/// 200 in-control batches.
pub fn binomial_calibration_path(particles: usize, stream: RngStream) -> Result<Vec<f64>> {
    let post = binomial_phase1_posterior(stream)?;
    let theta = Dist::Beta(post).draw(&mut stream.named("theta").rng());
    let ys = observe_path(
        ObservationModel::Binomial { trials: BINOM_TRIALS },
        &vec![theta; HORIZON],
        &mut stream.named("phase2").rng(),
    );
    Ok(run_binomial_pf(post, &ys, particles, stream.named("pf"))?.p)
}

#[derive(Clone, Debug)]
pub struct Table5Row {
    pub particles: usize,
    pub calibration: CalibrationResult,
    pub metrics: AggregateTable,
    pub mean_ess: f64,
    pub resample_fraction: f64,
    /// Same evaluation paths scored at fixed thresholds.
    pub sensitivity: Vec<(f64, AggregateTable)>,
}

pub fn table5_row(particles: usize, scale: f64, seed: u64, grid: &[f64], fixed: &[f64]) -> Result<Table5Row> {
    let root = RngStream::root(seed).named("table5").index(particles as u64);
    let cal_root = root.named("calibration");
    let calibration = calibrate_threshold(
        |i| binomial_calibration_path(particles, cal_root.index(i as u64)),
        scaled(1000, scale),
        grid,
        CalibrationTarget::ClosestEpisodes { episodes: 1.0 },
    )?;
    let spec = scenario::binomial_drift();
    let eval_root = root.named("evaluation");
    let runs: Vec<PfRun> = (0..scaled(1000, scale))
        .into_par_iter()
        .map(|i| {
            let s = eval_root.index(i as u64);
            let post = binomial_phase1_posterior(s)?;
            let ys = observe_path(spec.observation, &spec.latent_path(), &mut s.named("phase2").rng());
            run_binomial_pf(post, &ys, particles, s.named("pf"))
        })
        .collect::<Result<_>>()?;
    let paths: Vec<Vec<f64>> = runs.iter().map(|r| r.p.clone()).collect();
    let mut diag = RunDiagnostics::default();
    for r in &runs {
        diag.steps += r.diag.steps;
        diag.resamples += r.diag.resamples;
        diag.ess_sum += r.diag.ess_sum;
    }
    let score = ScoreSpec::tracking(71, 184, HORIZON);
    let metrics = evaluate_paths(&format!("P={particles}"), &paths, calibration.delta, &score)?;
    let sensitivity = fixed
        .iter()
        .map(|&d| Ok((d, evaluate_paths(&format!("P={particles} fixed"), &paths, d, &score)?)))
        .collect::<Result<_>>()?;
    Ok(Table5Row {
        particles,
        calibration,
        metrics,
        mean_ess: diag.mean_ess(),
        resample_fraction: diag.resample_fraction(),
        sensitivity,
    })
}

pub fn table5(scale: f64, seed: u64, grid: &[f64], particle_counts: &[usize]) -> Result<Vec<Table5Row>> {
    particle_counts
        .iter()
        .map(|&p| table5_row(p, scale, seed, grid, &[0.5, 0.1]))
        .collect()
}

fn table5_header() -> Vec<String> {
    let mut h: Vec<String> = ["particles", "threshold", "delta", "F_cal", "F_cal_mcse"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(delay_header(&["d1", "d2"]));
    h.extend(["F_pre", "F_pre_mcse", "mean_ess", "resample_fraction"].map(String::from));
    h
}

pub fn table5_text(rows: &[Table5Row]) -> TextTable {
    let names = ["d1", "d2"];
    let mut t = TextTable::new(table5_header());
    for r in rows {
        let mut c = vec![
            r.particles.to_string(),
            "calibrated".into(),
            g17(r.calibration.delta),
            g17(r.calibration.achieved_episodes),
            g17(r.calibration.mcse),
        ];
        c.extend(delay_cells(&r.metrics, &names));
        c.extend(mean_cells(&r.metrics.false_episodes));
        c.extend([g17(r.mean_ess), g17(r.resample_fraction)]);
        t.push(c);
        for (d, a) in &r.sensitivity {
            let mut c = vec![r.particles.to_string(), "fixed".into(), g17(*d), "NA".into(), "NA".into()];
            c.extend(delay_cells(a, &names));
            c.extend(mean_cells(&a.false_episodes));
            c.extend([g17(r.mean_ess), g17(r.resample_fraction)]);
            t.push(c);
        }
    }
    t
}

// ---------------------------------------------------------------- Figure 1

/// One simulated defect-count sequence with known in-control probability 0.01
/// and its `p_IC` path at threshold 0.5.
pub fn figure1(seed: u64) -> Result<TextTable> {
    let spec = scenario::binomial_example();
    let r = generate_scenario(&spec, RngStream::root(seed).named("fig1"))?;
    let model = BinomialBeta {
        batch_size: BINOM_TRIALS,
        reference: InControlReference::PointMass(0.01),
        ooc_prior: BetaAB::from_mean_sd(0.02, 0.01)?,
    };
    let delta = 0.5;
    let cfg = FilterConfig::new(
        model,
        DurationPrior::geometric_mean(100.0)?,
        DurationPrior::geometric_mean(100.0)?,
        delta,
    );
    let counts: Vec<u64> = r.observations.iter().map(|&v| v as u64).collect();
    let recs = crate::recoverable::run_stream(&cfg, &counts)?;
    let mut t = TextTable::new(FIGURE1_HEADER);
    for (i, rec) in recs.iter().enumerate() {
        t.push(vec![
            rec.t.to_string(),
            counts[i].to_string(),
            g17(r.latent[i]),
            g17(rec.p_ic),
            u8::from(rec.signaled).to_string(),
        ]);
    }
    Ok(t)
}

// ---------------------------------------------------- particle regime filter

/// Mean absolute error of the particle approximation of `p_IC` against the
/// exact filter, over `b` baseline recoverable sequences, for each particle count.
pub fn particle_variant_error(particle_counts: &[usize], b: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let root = RngStream::root(seed).named("particle-variant");
    let pr = ExpPriors::BASELINE;
    let spec = scenario::recoverable(pr.m);
    let per_rep: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let s = root.index(i as u64);
            let r = generate_scenario(&spec, s)?;
            let post = pr.in_control_prior()?.update(&r.phase1)?;
            let cfg = exp_filter(post, &pr, BASELINE_DELTA)?;
            let exact = p_ic_path(&cfg, &r.observations)?;
            particle_counts
                .iter()
                .map(|&p| {
                    let mut pf = RegimeParticleFilter::new(cfg.clone(), p, 0.5, s.named("pf").index(p as u64))?;
                    let mut err = 0.0;
                    for (t, &y) in r.observations.iter().enumerate() {
                        err += (pf.step(y)?.p_ic - exact[t]).abs();
                    }
                    Ok(err / exact.len() as f64)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(particle_counts
        .iter()
        .enumerate()
        .map(|(j, &p)| (p, per_rep.iter().map(|v| v[j]).sum::<f64>() / b as f64))
        .collect())
}
