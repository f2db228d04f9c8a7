//! End-to-end runs of the `bayesmon` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bayesmon::conjugate::{ExponentialGamma, GammaShapeRate, InControlReference};
use bayesmon::recoverable::{p_ic_path, DurationPrior, FilterConfig};
use bayesmon::rng::RngStream;
use bayesmon::scenario::{generate_scenario, named_scenario};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bayesmon"));
    c.env_remove("WINE_DATA");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bayesmon")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", stderr(&o));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const EXP_CONFIG: &str = r#"
version = 1
[model]
family = "exponential-gamma"
out_of_control = { mean = 40.0, sd = 10.0 }
[model.reference]
kind = "phase1"
file = "phase1.csv"
prior = { mean = 10.0, sd = 3.0 }
[threshold]
delta = 0.485
"#;

const PF_CONFIG: &str = r#"
version = 1
[model]
family = "tracking-pf"
observation = "gaussian"
state_sd = 0.08
obs_sd = 0.15
initial = { mean = 0.0, sd = 0.2 }
[region]
kind = "interval"
lower = -0.25
upper = 0.25
[particles]
count = 500
[threshold]
delta = 0.5
[calibration]
horizon = 50
"#;

/// A directory holding a simulated exponential stream, its Phase I sample and a config.
fn exp_workspace() -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let obs = dir.path().join("obs.csv");
    let cfg = dir.path().join("monitor.toml");
    ok(run(&[
        "simulate",
        "recoverable-exp",
        "--seed",
        "5",
        "--out",
        s(&obs),
        "--phase1-out",
        s(&dir.path().join("phase1.csv")),
    ]));
    fs::write(&cfg, EXP_CONFIG).unwrap();
    (dir, obs, cfg)
}

#[test]
fn simulate_then_monitor_matches_library() {
    let (dir, obs, cfg) = exp_workspace();
    let out = dir.path().join("p.csv");
    ok(run(&["monitor", "--config", s(&cfg), "--input", s(&obs), "--out", s(&out)]));

    let real = generate_scenario(&named_scenario("recoverable-exp").unwrap(), RngStream::root(5).named("simulate")).unwrap();
    let mut rdr = csv::Reader::from_path(&obs).unwrap();
    let ys: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(ys, real.observations, "simulate must round-trip observations exactly");

    let post = GammaShapeRate::from_mean_sd(10.0, 3.0).unwrap().update(&real.phase1).unwrap();
    let model = ExponentialGamma {
        reference: InControlReference::Posterior(post),
        ooc_prior: GammaShapeRate::from_mean_sd(40.0, 10.0).unwrap(),
    };
    let dur = DurationPrior::geometric_mean(200.0).unwrap();
    let want = p_ic_path(&FilterConfig::new(model, dur.clone(), dur, 0.485), &ys).unwrap();

    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["t", "p_ic", "signal", "n_states"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), want.len());
    for (i, (r, p)) in rows.iter().zip(&want).enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i + 1);
        let got: f64 = r[1].parse().unwrap();
        assert_eq!(got.to_bits(), p.to_bits(), "t={}", i + 1);
        assert_eq!(&r[2], if *p < 0.485 { "1" } else { "0" });
    }
}

#[test]
fn every_command_is_byte_deterministic() {
    let (dir, obs, cfg) = exp_workspace();
    let pf_cfg = dir.path().join("pf.toml");
    fs::write(&pf_cfg, PF_CONFIG).unwrap();
    let drift = dir.path().join("drift.csv");
    ok(run(&["simulate", "gaussian-drift", "--seed", "9", "--out", s(&drift)]));

    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "recoverable-exp", "--seed", "4"],
        vec!["simulate", "binomial-drift", "--seed", "4"],
        vec!["monitor", "--config", s(&cfg), "--input", s(&obs)],
        vec!["monitor", "--config", s(&pf_cfg), "--input", s(&drift), "--seed", "2"],
        vec!["calibrate", "--config", s(&cfg), "--seed", "3", "--replicates", "25"],
        vec!["calibrate", "--config", s(&pf_cfg), "--seed", "3", "--replicates", "10", "--particles", "200"],
        vec!["reproduce", "fig1", "--seed", "1"],
        vec!["reproduce", "table1", "--seed", "1", "--scale", "0.01"],
    ];
    for args in cases {
        let a = ok(run(&args));
        let b = ok(run(&args));
        assert!(!a.stdout.is_empty(), "{args:?} wrote nothing");
        assert_eq!(a.stdout, b.stdout, "{args:?} differs between runs");
    }
    // written files as well as standard output
    let out = |n: &str| dir.path().join(n);
    for name in ["r1", "r2"] {
        ok(run(&["reproduce", "table4", "--seed", "2", "--scale", "0.02", "--particles", "100,200", "--out", s(&out(name))]));
    }
    for f in ["table4.csv", "table4.manifest.json"] {
        assert_eq!(fs::read(out("r1").join(f)).unwrap(), fs::read(out("r2").join(f)).unwrap(), "{f}");
    }
    // the worker count does not change results
    let args = ["calibrate", "--config", s(&cfg), "--seed", "3", "--replicates", "25"];
    let one = bin().args(args).env("BAYESMON_THREADS", "1").output().unwrap();
    let two = bin().args(args).env("BAYESMON_THREADS", "3").output().unwrap();
    assert_eq!(ok(one).stdout, ok(two).stdout);
}

#[test]
fn malformed_row_is_reported_by_number() {
    let (dir, _, cfg) = exp_workspace();
    let input = dir.path().join("bad.csv");
    let mut text = String::from("y\n");
    for i in 2..17 {
        text.push_str(&format!("0.{i}\n"));
    }
    text.push_str("abc\n0.1\n");
    fs::write(&input, text).unwrap();
    let o = run(&["monitor", "--config", s(&cfg), "--input", s(&input)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("row 17"), "{}", stderr(&o));
    // rows before the bad one were already written
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 16);

    fs::write(&input, "y\n0.1\n-2\n").unwrap();
    let o = run(&["monitor", "--config", s(&cfg), "--input", s(&input)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn empty_input_gives_header_only() {
    let (dir, _, cfg) = exp_workspace();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let o = ok(run(&["monitor", "--config", s(&cfg), "--input", s(&input)]));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "t,p_ic,signal,n_states\n");
    fs::write(&input, "y\n").unwrap();
    let o = ok(run(&["monitor", "--config", s(&cfg), "--input", s(&input)]));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "t,p_ic,signal,n_states\n");
}

#[test]
fn monitor_reads_standard_input() {
    let (_dir, obs, cfg) = exp_workspace();
    let from_file = ok(run(&["monitor", "--config", s(&cfg), "--input", s(&obs)]));
    let stdin = fs::File::open(&obs).unwrap();
    let from_stdin = ok(bin().args(["monitor", "--config", s(&cfg)]).stdin(stdin).output().unwrap());
    assert_eq!(from_file.stdout, from_stdin.stdout);
}

#[test]
fn calibration_record_feeds_monitor() {
    let (dir, obs, cfg) = exp_workspace();
    let rec = dir.path().join("cal.json");
    // a one-point grid always selects that point
    let o = ok(run(&[
        "calibrate", "--config", s(&cfg), "--seed", "8", "--replicates", "20", "--grid", "0.3", "--out", s(&rec),
    ]));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&rec).unwrap()).unwrap();
    assert_eq!(v["result"]["delta"], 0.3);
    assert_eq!(v["result"]["grid"].as_array().unwrap().len(), 1);
    assert_eq!(v["seed"], 8);
    ok(run(&["schema-check", "calibration-record", s(&rec)]));

    let a = ok(run(&["monitor", "--config", s(&cfg), "--input", s(&obs), "--calibration-record", s(&rec)]));
    let b = ok(run(&["monitor", "--config", s(&cfg), "--input", s(&obs), "--delta", "0.3"]));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    let (dir, obs, cfg) = exp_workspace();
    // usage
    assert_eq!(code(&run(&["simulate", "no-such-scenario", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["simulate", "recoverable-exp"])), 2);
    assert_eq!(code(&run(&["reproduce", "table9", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["monitor", "--config", s(&dir.path().join("missing.toml")), "--input", s(&obs)])), 2);
    assert_eq!(code(&run(&["calibrate", "--config", s(&cfg), "--seed", "1", "--grid", "0.5,0.2"])), 2);
    assert_eq!(code(&run(&["schema-check", "nonsense", s(&obs)])), 2);
    let pf_cfg = dir.path().join("pf.toml");
    fs::write(&pf_cfg, PF_CONFIG).unwrap();
    let o = run(&["monitor", "--config", s(&pf_cfg), "--input", s(&obs)]);
    assert_eq!(code(&o), 2, "PF without --seed: {}", stderr(&o));

    // parse
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,y,theta\n1,2\n").unwrap();
    assert_eq!(code(&run(&["schema-check", "simulate", s(&bad)])), 3);

    // numerical: every particle weight underflows
    let far = dir.path().join("far.csv");
    fs::write(&far, "y\n1e200\n").unwrap();
    let o = run(&["monitor", "--config", s(&pf_cfg), "--input", s(&far), "--seed", "1"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    // unattainable band reports the nearest miss
    let o = run(&["calibrate", "--config", s(&cfg), "--seed", "1", "--replicates", "10", "--target", "band=50:60"]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("nearest"), "{}", stderr(&o));

    // missing data
    let o = run(&["reproduce", "table6", "--seed", "1"]);
    assert_eq!(code(&o), 6);
    let o = run(&["reproduce", "table6", "--seed", "1", "--data", s(&dir.path().join("none.csv"))]);
    assert_eq!(code(&o), 6);
}

#[test]
fn reproduce_outputs_pass_schema_check() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tables");
    let runs: [&[&str]; 6] = [
        &["table1", "--scale", "0.01"],
        &["table2", "--scale", "0.01", "--grid", "step=0.05"],
        &["table3", "--scale", "0.01"],
        &["table4", "--scale", "0.01", "--particles", "100"],
        &["table5", "--scale", "0.005", "--grid", "step=0.05", "--particles", "100"],
        &["fig1"],
    ];
    for extra in runs {
        let mut args = vec!["reproduce"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--seed", "3", "--out", s(&out)]);
        ok(run(&args));
        let table = extra[0];
        let csv = out.join(format!("{table}.csv"));
        let o = ok(run(&["schema-check", table, s(&csv)]));
        assert!(!o.stdout.is_empty() || !o.stderr.is_empty());
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join(format!("{table}.manifest.json"))).unwrap()).unwrap();
        assert_eq!(manifest["parameters"]["seed"], 3);
    }

    let (wdir, obs, cfg) = exp_workspace();
    ok(run(&["schema-check", "simulate", s(&obs)]));
    ok(run(&["schema-check", "phase1", s(&wdir.path().join("phase1.csv"))]));
    let m = wdir.path().join("m.csv");
    ok(run(&["monitor", "--config", s(&cfg), "--input", s(&obs), "--out", s(&m)]));
    ok(run(&["schema-check", "monitor-conjugate", s(&m)]));
    assert_eq!(code(&run(&["schema-check", "monitor-pf", s(&m)])), 3);
}
