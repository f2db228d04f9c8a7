//! Acceptance gate: one PASS/FAIL/SKIPPED line per criterion.
//!
//! Runs at full scale (minutes). The wine criterion needs the data file named
//! by `WINE_DATA`; without it the criterion is reported as skipped.

#[path = "../../core/tests/common/brute_force.rs"]
mod brute_force;

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use bayesmon::calibration::{calibrate_region_radius, threshold_grid, CalibrationResult};
use bayesmon::conjugate::{
    log_pred_binomial_beta, log_pred_exponential_gamma, BetaAB, BinomialBeta, ConjugateModel, ExponentialGamma,
    GammaShapeRate, InControlReference,
};
use bayesmon::experiments::{self as ex, ExpPriors, BASELINE_DELTA};
use bayesmon::metrics::AggregateTable;
use bayesmon::recoverable::{DurationPrior, FilterConfig, FilterState, Regime};
use bayesmon::rng::RngStream;
use bayesmon::tracking::systematic_resample;
use bayesmon::wine::{read_wine, wine_pipeline, WineConfig};
use brute_force::{beta_binomial_marginal, gamma_exponential_marginal, Enumeration, IC};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};
use statrs::function::factorial::ln_binomial;

const SEED: u64 = 20261018;

enum Verdict {
    Pass,
    Fail,
    Skipped,
}

struct Line {
    id: String,
    verdict: Verdict,
    failures: Vec<String>,
    detail: String,
}

struct Checks {
    failed: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { failed: Vec::new() }
    }

    /// Record a named condition; returns it for chaining.
    fn that(&mut self, ok: bool, what: String) -> bool {
        if !ok {
            self.failed.push(what);
        }
        ok
    }

    fn within(&mut self, name: &str, v: f64, lo: f64, hi: f64) -> bool {
        self.that(v >= lo && v <= hi, format!("{name} = {v:.4} not in [{lo}, {hi}]"))
    }

    fn verdict(&self) -> Verdict {
        if self.failed.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

fn delay(t: &AggregateTable, name: &str) -> (f64, f64, f64) {
    let d = t.delay(name).unwrap_or_else(|| panic!("no delay {name} in {}", t.label));
    (d.delay.mean, d.delay.mcse, d.miss_rate())
}

// ------------------------------------------------------------------ 1

fn max_oracle_gap<M: ConjugateModel>(cfg: FilterConfig<M>, obs: &[M::Obs], q: &HashMap<(usize, u8), f64>) -> f64 {
    let mut f = FilterState::new(cfg).unwrap();
    for &y in obs {
        f.step(y).unwrap();
    }
    let mut gap: f64 = 0.0;
    for (&(c, s), &p) in q {
        let r = if s == IC { Regime::InControl } else { Regime::OutOfControl };
        gap = gap.max((f.mass(c, r) - p).abs());
    }
    for st in f.states() {
        if !q.contains_key(&(st.changepoint, st.regime.index())) {
            gap = gap.max(st.log_mass.exp());
        }
    }
    gap
}

fn criterion1() -> Line {
    let mut rng = RngStream::root(SEED).named("acceptance").named("oracle").rng();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let hazards = [(0.005, 0.005), (0.05, 0.2), (0.3, 0.6)];
    for &(h0, h1) in &hazards {
        let geo = |p: f64| DurationPrior::geometric(p).unwrap();
        let hic = move |_: usize| h0;
        let hooc = move |_: usize| h1;
        for t_len in 1..=6 {
            // Exponential-Gamma with a Phase I posterior and with a point reference
            let ys: Vec<f64> = (0..t_len)
                .map(|_| Exp::new(if rng.random::<bool>() { 10.0 } else { 40.0 }).unwrap().sample(&mut rng))
                .collect();
            let ooc = GammaShapeRate::from_mean_sd(40.0, 10.0).unwrap();
            let post = GammaShapeRate::new(61.0, 6.1).unwrap();
            for reference in [InControlReference::Posterior(post), InControlReference::PointMass(10.0)] {
                let ic = move |y: f64| match reference {
                    InControlReference::PointMass(r) => r.ln() - r * y,
                    InControlReference::Posterior(g) => {
                        g.shape.ln() + g.shape * g.rate.ln() - (g.shape + 1.0) * (g.rate + y).ln()
                    }
                };
                let seg = move |s: &[f64]| gamma_exponential_marginal(ooc.shape, ooc.rate, s);
                let q = Enumeration {
                    ic_loglik: &ic,
                    ooc_segment_loglik: &seg,
                    hazard_ic: &hic,
                    hazard_ooc: &hooc,
                    absorbing: false,
                }
                .posterior(&ys);
                let model = ExponentialGamma {
                    reference,
                    ooc_prior: ooc,
                };
                worst = worst.max(max_oracle_gap(FilterConfig::new(model, geo(h0), geo(h1), 0.5), &ys, &q));
                cases += 1;
            }
            // Binomial-Beta
            let n = 100u64;
            let ys: Vec<u64> = (0..t_len)
                .map(|_| {
                    let p = if rng.random::<bool>() { 0.01 } else { 0.04 };
                    (0..n).filter(|_| rng.random::<f64>() < p).count() as u64
                })
                .collect();
            let yf: Vec<f64> = ys.iter().map(|&y| y as f64).collect();
            let ooc = BetaAB::from_mean_sd(0.02, 0.01).unwrap();
            for reference in [InControlReference::Posterior(BetaAB::new(51.0, 4951.0).unwrap()), InControlReference::PointMass(0.01)] {
                let ic = move |y: f64| match reference {
                    InControlReference::PointMass(p) => {
                        ln_binomial(n, y as u64) + y * p.ln() + (n as f64 - y) * (1.0 - p).ln()
                    }
                    InControlReference::Posterior(b) => beta_binomial_marginal(b.a, b.b, n, &[y]),
                };
                let seg = move |s: &[f64]| beta_binomial_marginal(ooc.a, ooc.b, n, s);
                let q = Enumeration {
                    ic_loglik: &ic,
                    ooc_segment_loglik: &seg,
                    hazard_ic: &hic,
                    hazard_ooc: &hooc,
                    absorbing: false,
                }
                .posterior(&yf);
                let model = BinomialBeta {
                    batch_size: n,
                    reference,
                    ooc_prior: ooc,
                };
                worst = worst.max(max_oracle_gap(FilterConfig::new(model, geo(h0), geo(h1), 0.5), &ys, &q));
                cases += 1;
            }
        }
    }
    let mut c = Checks::new();
    c.that(worst <= 1e-9, format!("max |q_filter - q_enum| = {worst:.3e} > 1e-9"));
    Line {
        id: "1".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!("{cases} configurations, T <= 6, max |q_filter - q_enum| = {worst:.2e} (tol 1e-9)"),
    }
}

// ------------------------------------------------------------------ 2

fn criterion2() -> Line {
    let root = RngStream::root(SEED).named("acceptance").named("normalization");
    let (mut steps, mut worst, mut forbidden) = (0usize, 0.0f64, 0usize);
    let mut observe = |states: &[bayesmon::recoverable::RegimeState]| {
        let total: f64 = states.iter().map(|s| s.log_mass.exp()).sum();
        worst = worst.max((total - 1.0).abs());
        forbidden += states
            .iter()
            .filter(|s| s.changepoint == 0 && s.regime == Regime::OutOfControl && s.log_mass.exp() > 0.0)
            .count();
    };
    for k in 0..10u64 {
        let mut rng = root.index(k).rng();
        let h0 = 0.001 + 0.2 * rng.random::<f64>();
        let h1 = 0.001 + 0.4 * rng.random::<f64>();
        let model = ExponentialGamma {
            reference: InControlReference::Posterior(GammaShapeRate::new(51.0, 5.0).unwrap()),
            ooc_prior: GammaShapeRate::from_mean_sd(40.0, 10.0).unwrap(),
        };
        let cfg = FilterConfig::new(model, DurationPrior::geometric(h0).unwrap(), DurationPrior::geometric(h1).unwrap(), 0.5)
            .with_prune_tol(if k % 2 == 0 { 0.0 } else { 1e-12 });
        let mut f = FilterState::new(cfg).unwrap();
        let mut rate = 10.0;
        for _ in 0..500 {
            if rng.random::<f64>() < 0.02 {
                rate = if rate == 10.0 { 40.0 } else { 10.0 };
            }
            f.step(Exp::new(rate).unwrap().sample(&mut rng)).unwrap();
            observe(f.states());
            steps += 1;
        }
        let model = BinomialBeta {
            batch_size: 200,
            reference: InControlReference::PointMass(0.01),
            ooc_prior: BetaAB::from_mean_sd(0.02, 0.01).unwrap(),
        };
        let cfg = FilterConfig::new(model, DurationPrior::geometric(h0).unwrap(), DurationPrior::geometric(h1).unwrap(), 0.5)
            .with_prune_tol(1e-12)
            .absorbing(k % 3 == 0);
        let mut f = FilterState::new(cfg).unwrap();
        for t in 0..500 {
            let p = if (200..300).contains(&t) { 0.03 } else { 0.01 };
            f.step((0..200).filter(|_| rng.random::<f64>() < p).count() as u64).unwrap();
            observe(f.states());
            steps += 1;
        }
    }
    let mut c = Checks::new();
    c.that(steps >= 10_000, format!("only {steps} steps"));
    c.that(worst <= 1e-10, format!("max |sum - 1| = {worst:.3e}"));
    c.that(forbidden == 0, format!("{forbidden} steps with mass on (0, OOC)"));
    Line {
        id: "2".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!("{steps} steps, max |sum mass - 1| = {worst:.2e}, (0,OOC) occurrences = {forbidden}"),
    }
}

// ------------------------------------------------------------------ 3

fn criterion3(grid: &[f64]) -> (Line, CalibrationResult) {
    let r = ex::calibrate_exp(&ExpPriors::BASELINE, 1000, grid, RngStream::root(SEED).named("acceptance").named("calibration"))
        .expect("baseline calibration");
    let mut c = Checks::new();
    c.within("delta", r.delta, 0.435, 0.535);
    c.within("mean episodes", r.achieved_episodes, 0.85, 1.15);
    (
        Line {
            id: "3".into(),
            verdict: c.verdict(),
            failures: c.failed.clone(),
            detail: format!(
                "delta = {} (band [0.435, 0.535]), mean episodes = {:.3} +- {:.3} (band [0.85, 1.15])",
                r.delta, r.achieved_episodes, r.mcse
            ),
        },
        r,
    )
}

// ------------------------------------------------------------------ 4

fn criterion4() -> Line {
    let t = ex::table1(1.0, SEED, BASELINE_DELTA).expect("table1");
    let mut c = Checks::new();
    let (s1, _, sm) = delay(&t.single, "d1");
    let sf = t.single.false_episodes.mean;
    c.within("single d1", s1, 6.2, 6.8);
    c.within("single F", sf, 0.35, 0.55);
    c.that(sm == 0.0, format!("single d1 miss rate {sm}"));
    let (r1, _, m1) = delay(&t.recoverable, "d1");
    let (r2, _, m2) = delay(&t.recoverable, "d2");
    let (r3, _, m3) = delay(&t.recoverable, "d3");
    let rf = t.recoverable.false_episodes.mean;
    c.within("recoverable d1", r1, 6.3, 6.9);
    c.within("recoverable d2", r2, 4.2, 4.9);
    c.within("recoverable d3", r3, 5.45, 5.90);
    c.within("recoverable F", rf, 0.45, 0.65);
    c.that(m1 == 0.0 && m2 == 0.0 && m3 == 0.0, format!("recoverable miss rates {m1}/{m2}/{m3}"));
    Line {
        id: "4".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!(
            "single d1 {s1:.3} F {sf:.3}; recoverable d1 {r1:.3} d2 {r2:.3} d3 {r3:.3} F {rf:.3}; misses {sm}/{m1}/{m2}/{m3}"
        ),
    }
}

// ------------------------------------------------------------------ 5

fn criterion5() -> Line {
    let rows = ex::table3(1.0, SEED, BASELINE_DELTA).expect("table3");
    let (clean, contam, ramp, wrong) = (&rows[0], &rows[1..3], &rows[3], &rows[4]);
    let mut c = Checks::new();
    let mut gap: f64 = 0.0;
    for row in contam {
        for d in ["d1", "d2", "d3"] {
            let (v, _, miss) = delay(row, d);
            let (base, _, _) = delay(clean, d);
            gap = gap.max((v - base).abs());
            c.that((v - base).abs() <= 1.0, format!("{} {d} = {v:.3} vs clean {base:.3}", row.label));
            c.that(miss == 0.0, format!("{} {d} miss rate {miss}", row.label));
        }
    }
    let (rd1, _, _) = delay(ramp, "d1");
    c.within("ramp d1", rd1, 20.0, 26.0);
    let (_, _, wm1) = delay(wrong, "d1");
    let (_, _, wm3) = delay(wrong, "d3");
    c.within("wrong-direction d1 miss", wm1, 0.70, 0.84);
    c.within("wrong-direction d3 miss", wm3, 0.38, 0.51);
    Line {
        id: "5".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!(
            "contamination max |delay - clean| = {gap:.3}; ramp d1 {rd1:.3}; wrong-direction miss d1 {wm1:.3} d3 {wm3:.3}"
        ),
    }
}

// ------------------------------------------------------------------ 6

fn criterion6() -> Line {
    let rows = ex::table4(1.0, SEED, &[500, 2000, 5000]).expect("table4");
    let mut c = Checks::new();
    let limits = [0.015, 0.008, 0.005];
    let ess = [303.0, 1211.0, 3027.0];
    for ((r, lim), e) in rows.iter().zip(limits).zip(ess) {
        c.that(r.rmse_p <= lim, format!("P={} RMSE {:.5} > {lim}", r.particles, r.rmse_p));
        c.within(&format!("P={} mean ESS", r.particles), r.mean_ess, 0.85 * e, 1.15 * e);
        c.within(&format!("P={} resampling fraction", r.particles), r.resample_fraction, 0.27, 0.36);
    }
    c.that(
        rows[0].rmse_p > rows[1].rmse_p && rows[1].rmse_p > rows[2].rmse_p,
        "RMSE not strictly decreasing".into(),
    );
    let f = |g: fn(&ex::Table4Row) -> f64| rows.iter().map(|r| format!("{:.4}", g(r))).collect::<Vec<_>>().join("/");
    Line {
        id: "6".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!(
            "P=500/2000/5000: RMSE(p_A) {}, mean ESS {}, resampling fraction {}",
            f(|r| r.rmse_p),
            f(|r| r.mean_ess),
            f(|r| r.resample_fraction)
        ),
    }
}

// ------------------------------------------------------------------ 7

fn criterion7(grid: &[f64]) -> Line {
    let r = ex::table5_row(5000, 1.0, SEED, grid, &[0.5, 0.1]).expect("table5");
    let mut c = Checks::new();
    c.within("delta", r.calibration.delta, 0.975, 0.995);
    let (d1, _, m1) = delay(&r.metrics, "d1");
    let (d2, _, m2) = delay(&r.metrics, "d2");
    c.that(d1 <= 0.2, format!("d1 {d1:.3} > 0.2"));
    c.that(m1 == 0.0, format!("d1 miss rate {m1}"));
    c.within("d2", d2, 11.0, 13.2);
    c.within("d2 miss rate", m2, 0.02, 0.08);
    let fixed: Vec<f64> = r.sensitivity.iter().map(|(_, t)| delay(t, "d1").0).collect();
    c.within("d1 at delta 0.5", fixed[0], 2.3, 3.6);
    c.within("d1 at delta 0.1", fixed[1], 8.0, 10.0);
    Line {
        id: "7".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!(
            "P=5000: delta {}, d1 {d1:.3} (miss {m1:.3}), d2 {d2:.3} (miss {m2:.3}); fixed delta 0.5 d1 {:.3}, 0.1 d1 {:.3}",
            r.calibration.delta, fixed[0], fixed[1]
        ),
    }
}

// ------------------------------------------------------------------ 8

fn criterion8() -> Line {
    let path = std::env::var_os("WINE_DATA").map(PathBuf::from);
    let Some(path) = path.filter(|p| p.is_file()) else {
        return Line {
            id: "8".into(),
            verdict: Verdict::Skipped,
            failures: Vec::new(),
            detail: "wine data file not available (set WINE_DATA to the white wine quality CSV)".into(),
        };
    };
    let data = read_wine(&path).expect("wine data");
    let r = wine_pipeline(&data, &WineConfig::default(), SEED).expect("wine pipeline");
    let mut c = Checks::new();
    c.within("raw condition number", r.cond_raw, 359.7 * 0.95, 359.7 * 1.05);
    c.within("shrunk condition number", r.cond_shrunk, 60.0 * 0.95, 60.0 * 1.05);
    c.within("c_A", r.c_a, 2.5, 2.75);
    c.that(r.exceed_test <= 0.03, format!("quality-7 exceedance {:.4} > 0.03", r.exceed_test));
    c.within("quality-6 exceedance", r.exceed_degraded, 0.32, 0.42);
    c.within("delta", r.calibration.delta, 0.15, 0.28);
    let (d1, _, m1) = delay(&r.metrics, "d1");
    let (d2, _, m2) = delay(&r.metrics, "d2");
    c.within("d1", d1, 15.0, 19.0);
    c.that(m1 <= 0.06, format!("d1 miss rate {m1:.3} > 0.06"));
    c.within("d2", d2, 1.3, 2.0);
    c.that(m2 == 0.0, format!("d2 miss rate {m2}"));
    Line {
        id: "8".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!(
            "cond {:.1} -> {:.1}, c_A {:.3}, exceedance {:.3}/{:.3}, delta {}, d1 {d1:.2} (miss {m1:.3}), d2 {d2:.2} (miss {m2:.3})",
            r.cond_raw, r.cond_shrunk, r.c_a, r.exceed_test, r.exceed_degraded, r.calibration.delta
        ),
    }
}

// ------------------------------------------------------------------ 9

fn lomax_integral(shape: f64, rate: f64) -> f64 {
    let post = GammaShapeRate::new(shape, rate).unwrap();
    let n = 20_000usize;
    let h = 1.0 / n as f64;
    let f = |u: f64| {
        if u <= 0.0 {
            return shape;
        }
        if u >= 1.0 {
            return shape * 0f64.powf(shape - 1.0);
        }
        let y = rate * u / (1.0 - u);
        log_pred_exponential_gamma(&post, y).unwrap().exp() * rate / ((1.0 - u) * (1.0 - u))
    };
    let mut s = f(0.0) + f(1.0);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0
}

fn cli_byte_identity() -> Result<usize, String> {
    let exe = env!("CARGO_BIN_EXE_bayesmon");
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let cfg = format!(
        "version = 1\n[model]\nfamily = \"exponential-gamma\"\nout_of_control = {{ mean = 40.0, sd = 10.0 }}\n\
         [model.reference]\nkind = \"phase1\"\nfile = \"phase1.csv\"\nprior = {{ mean = 10.0, sd = 3.0 }}\n\
         [threshold]\ndelta = {BASELINE_DELTA}\n"
    );
    std::fs::write(p("m.toml"), cfg).map_err(|e| e.to_string())?;
    let pf = "version = 1\n[model]\nfamily = \"tracking-pf\"\nobservation = \"binomial\"\nstate_sd = 0.08\ntrials = 500\n\
              initial = { a = 10.0, b = 990.0 }\n[region]\nkind = \"at-most\"\nbound = 0.02\n[particles]\ncount = 300\n\
              [threshold]\ndelta = 0.9\n[calibration]\nhorizon = 40\n";
    std::fs::write(p("pf.toml"), pf).map_err(|e| e.to_string())?;
    let sim = |args: &[&str]| Command::new(exe).args(args).output();
    let o = sim(&["simulate", "recoverable-exp", "--seed", "1", "--out", &p("obs.csv"), "--phase1-out", &p("phase1.csv")])
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err("simulate failed".into());
    }
    sim(&["simulate", "binomial-drift", "--seed", "1", "--out", &p("bin.csv")]).map_err(|e| e.to_string())?;
    let commands: Vec<Vec<String>> = [
        vec!["simulate", "recoverable-exp", "--seed", "2"],
        vec!["simulate", "gaussian-drift", "--seed", "2"],
        vec!["monitor", "--config", &p("m.toml"), "--input", &p("obs.csv")],
        vec!["monitor", "--config", &p("pf.toml"), "--input", &p("bin.csv"), "--seed", "4"],
        vec!["calibrate", "--config", &p("m.toml"), "--seed", "5", "--replicates", "40"],
        vec!["calibrate", "--config", &p("pf.toml"), "--seed", "5", "--replicates", "8", "--grid", "step=0.05"],
        vec!["reproduce", "fig1", "--seed", "6"],
        vec!["reproduce", "table3", "--seed", "6", "--scale", "0.01"],
        vec!["schema-check", "simulate", &p("obs.csv")],
    ]
    .iter()
    .map(|v| v.iter().map(|s| s.to_string()).collect())
    .collect();
    for args in &commands {
        let a = Command::new(exe).args(args).output().map_err(|e| e.to_string())?;
        let b = Command::new(exe).args(args).output().map_err(|e| e.to_string())?;
        if !a.status.success() {
            return Err(format!("{} exited {:?}: {}", args.join(" "), a.status.code(), String::from_utf8_lossy(&a.stderr)));
        }
        if a.stdout != b.stdout || a.stdout.is_empty() && args[0] != "schema-check" {
            return Err(format!("{} output differs between runs or is empty", args.join(" ")));
        }
    }
    Ok(commands.len())
}

fn criterion9(curve: &CalibrationResult) -> Line {
    let mut c = Checks::new();
    let mut rng = RngStream::root(SEED).named("acceptance").named("properties").rng();

    let mut pmf_gap: f64 = 0.0;
    for n in [0u64, 1, 7, 50, 500, 1000] {
        for (a, b) in [(0.1, 0.1), (1.0, 99.0), (251.0, 24751.0), (3.5, 2.0), (50.0, 5000.0)] {
            let post = BetaAB::new(a, b).unwrap();
            let s: f64 = (0..=n).map(|y| log_pred_binomial_beta(&post, y, n).unwrap().exp()).sum();
            pmf_gap = pmf_gap.max((s - 1.0).abs());
        }
    }
    c.that(pmf_gap <= 1e-9, format!("Beta-Binomial pmf sums off by {pmf_gap:.2e}"));

    let mut lomax_gap: f64 = 0.0;
    for (shape, rate) in [(1.0, 1.0), (3.0, 0.3), (61.0, 6.0), (16.0, 0.4), (400.0, 40.0)] {
        lomax_gap = lomax_gap.max((lomax_integral(shape, rate) - 1.0).abs());
    }
    c.that(lomax_gap <= 1e-6, format!("Lomax quadrature off by {lomax_gap:.2e}"));

    let mut bad_calls = 0;
    let calls = 2000;
    for _ in 0..calls {
        let n = rng.random_range(1..400usize);
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
        let tot: f64 = raw.iter().sum();
        if tot == 0.0 {
            continue;
        }
        let w: Vec<f64> = raw.iter().map(|v| v / tot).collect();
        let mut counts = vec![0usize; n];
        for i in systematic_resample(&w, &mut rng) {
            counts[i] += 1;
        }
        if counts.iter().zip(&w).any(|(&k, wi)| (k as f64 - wi * n as f64).abs() >= 1.0 + 1e-9) {
            bad_calls += 1;
        }
    }
    c.that(bad_calls == 0, format!("{bad_calls} resampling calls broke floor/ceil multiplicities"));

    let dips = curve.curve.windows(2).filter(|w| w[1].mean_episodes < w[0].mean_episodes).count();
    c.that(dips == 0, format!("calibration curve decreases at {dips} grid steps"));

    let (d, b, n_boot, q) = (11usize, 10usize, 5000usize, 0.95);
    let s = RngStream::root(SEED).named("acceptance").named("radius");
    let mut prng = s.named("pool").rng();
    let pool: Vec<Vec<f64>> = (0..200_000).map(|_| (0..d).map(|_| StandardNormal.sample(&mut prng)).collect()).collect();
    let c_a = calibrate_region_radius(&pool, b, n_boot, &[0.0; 11], &DMatrix::identity(d, d), q, &mut s.named("boot").rng())
        .expect("radius");
    let chi = ChiSquared::new(d as f64).unwrap();
    let x = chi.inverse_cdf(q);
    let se = (q * (1.0 - q) / n_boot as f64).sqrt() / (b as f64 * chi.pdf(x));
    let want = x / b as f64;
    c.that((c_a - want).abs() < 3.0 * se, format!("c_A {c_a:.4} vs {want:.4} (se {se:.4})"));

    let cli = cli_byte_identity();
    let cli_note = match &cli {
        Ok(n) => format!("{n} CLI invocations byte-identical"),
        Err(e) => e.clone(),
    };
    c.that(cli.is_ok(), cli_note.clone());

    Line {
        id: "9".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!(
            "pmf |sum-1| {pmf_gap:.1e}; Lomax |int-1| {lomax_gap:.1e}; {calls} resampling calls, {bad_calls} bad; \
             curve dips {dips}; c_A {c_a:.4} vs {want:.4} (3 se = {:.4}); {cli_note}",
            3.0 * se
        ),
    }
}

// ------------------------------------------------------------------ 10

fn criterion10() -> Line {
    let errs = ex::particle_variant_error(&[500, 2000, 8000], 50, SEED).expect("particle variant");
    let e: Vec<f64> = errs.iter().map(|x| x.1).collect();
    let mut c = Checks::new();
    c.that(e[1] < 0.02, format!("P=2000 error {:.4} >= 0.02", e[1]));
    c.that(e[0] > e[1] && e[1] > e[2], "error not decreasing in P".into());
    Line {
        id: "10".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: format!("mean |p_IC(particles) - p_IC(exact)| at P=500/2000/8000: {:.4}/{:.4}/{:.4}", e[0], e[1], e[2]),
    }
}

// --------------------------------------------------------------- table 2

fn table2_gate(grid: &[f64]) -> Line {
    // (row, paper d1/d2/d3 means and MCSEs)
    let paper: [(usize, [(f64, f64); 3]); 3] = [
        (1, [(6.57, 0.09), (4.56, 0.11), (5.66, 0.06)]),
        (5, [(7.21, 0.10), (4.27, 0.10), (5.89, 0.07)]),
        (7, [(6.83, 0.10), (4.50, 0.10), (5.77, 0.07)]),
    ];
    let mut c = Checks::new();
    let mut parts = Vec::new();
    for (row, want) in paper {
        let r = ex::table2_row(row, 1.0, SEED, grid).expect("table2 row");
        let mut cells = Vec::new();
        for (name, (p, pse)) in ["d1", "d2", "d3"].iter().zip(want) {
            let (v, se, _) = delay(&r.metrics, name);
            let tol = 3.0 * (pse * pse + se * se).sqrt();
            c.that((v - p).abs() <= tol, format!("row {row} {name} {v:.3} vs {p} (tol {tol:.3})"));
            cells.push(format!("{name} {v:.2}"));
        }
        parts.push(format!("row {row} (delta {}) {}", r.calibration.delta, cells.join(" ")));
    }
    let r6 = ex::table2_row(6, 1.0, SEED, grid).expect("row 6");
    let (d1_6, _, _) = delay(&r6.metrics, "d1");
    c.that(d1_6 > 14.0, format!("row 6 d1 {d1_6:.3} <= 14"));
    let r8 = ex::table2_row(8, 1.0, SEED, grid).expect("row 8");
    let (_, _, m8) = delay(&r8.metrics, "d1");
    c.that(m8 > 0.10, format!("row 8 d1 miss rate {m8:.3} <= 0.10"));
    parts.push(format!("row 6 d1 {d1_6:.2}; row 8 d1 miss {m8:.3}"));
    Line {
        id: "table2".into(),
        verdict: c.verdict(),
        failures: c.failed.clone(),
        detail: parts.join("; "),
    }
}

fn main() {
    // `cargo test -- --list` and filtered runs should not trigger the full suite
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let grid = threshold_grid(0.005).unwrap();
    let mut lines = Vec::new();
    let mut report = |line: Line, started: Instant| {
        let tag = match line.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
        };
        println!("criterion {:>6} {tag:<7} [{:>6.1}s] {}", line.id, started.elapsed().as_secs_f64(), line.detail);
        for f in &line.failures {
            println!("    failed: {f}");
        }
        lines.push((line.id, tag));
    };

    let t = Instant::now();
    report(criterion1(), t);
    let t = Instant::now();
    report(criterion2(), t);
    let t = Instant::now();
    let (line, curve) = criterion3(&grid);
    report(line, t);
    let t = Instant::now();
    report(criterion4(), t);
    let t = Instant::now();
    report(criterion5(), t);
    let t = Instant::now();
    report(criterion6(), t);
    let t = Instant::now();
    report(criterion7(&grid), t);
    let t = Instant::now();
    report(criterion8(), t);
    let t = Instant::now();
    report(criterion9(&curve), t);
    let t = Instant::now();
    report(criterion10(), t);
    let t = Instant::now();
    report(table2_gate(&grid), t);

    let failed: Vec<&String> = lines.iter().filter(|l| l.1 == "FAIL").map(|l| &l.0).collect();
    let skipped = lines.iter().filter(|l| l.1 == "SKIPPED").count();
    println!(
        "acceptance: {} passed, {} failed, {skipped} skipped",
        lines.len() - failed.len() - skipped,
        failed.len()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
