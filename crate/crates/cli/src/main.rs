//! `bayesmon`: monitor streams, calibrate thresholds, reproduce the benchmark studies.
//!
//! Exit status: 0 success, 2 usage or configuration error, 3 unparseable
//! input, 4 numerical failure, 5 calibration target unattainable, 6 missing
//! data file, 1 other I/O failure.

mod calibrate;
mod config;
mod input;
mod monitor;
mod reproduce;
mod schema;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bayesmon::format::{g17, TextTable};
use bayesmon::rng::RngStream;
use bayesmon::scenario::{generate_scenario, named_scenario, SCENARIO_NAMES};
use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Parse(String),
    Numerical(String),
    Unattainable(String),
    MissingData(String),
    Io(io::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Parse(_) => 3,
            Failure::Numerical(_) => 4,
            Failure::Unattainable(_) => 5,
            Failure::MissingData(_) => 6,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            Failure::Usage(m) => Failure::Usage(format!("{what}: {m}")),
            Failure::Parse(m) => Failure::Parse(format!("{what}: {m}")),
            Failure::Numerical(m) => Failure::Numerical(format!("{what}: {m}")),
            Failure::Unattainable(m) => Failure::Unattainable(format!("{what}: {m}")),
            Failure::MissingData(m) => Failure::MissingData(format!("{what}: {m}")),
            Failure::Io(e) => Failure::Io(io::Error::new(e.kind(), format!("{what}: {e}"))),
        }
    }

    pub fn into_lib(self) -> bayesmon::Error {
        bayesmon::Error::Domain(self.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Parse(m) | Failure::Numerical(m) | Failure::MissingData(m) => f.write_str(m),
            Failure::Unattainable(m) => write!(f, "calibration target unattainable: {m}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<bayesmon::Error> for Failure {
    fn from(e: bayesmon::Error) -> Self {
        use bayesmon::Error as E;
        match e {
            E::Domain(_) | E::Dimension { .. } => Failure::Usage(e.to_string()),
            E::Numerical { .. } | E::Degenerate { .. } | E::NotPositiveDefinite(_) => Failure::Numerical(e.to_string()),
            E::CalibrationUnattainable(r) => Failure::Unattainable(format!(
                "no grid threshold gives mean episodes in the target band; nearest miss delta={} with {} episodes (mcse {}) and {} signalling timepoints",
                g17(r.delta),
                g17(r.achieved_episodes),
                g17(r.mcse),
                g17(r.mean_timepoints)
            )),
            E::Data(m) => Failure::Parse(m),
        }
    }
}

#[derive(Parser)]
#[command(name = "bayesmon", version, about = "Sequential Bayesian process monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter an observation stream, writing one CSV record per observation.
    Monitor {
        #[arg(long)]
        config: PathBuf,
        /// Observation file; `-` or absent reads standard input.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Required for particle-filter models.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, conflicts_with = "calibration_record")]
        delta: Option<f64>,
        #[arg(long)]
        calibration_record: Option<PathBuf>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long, default_value = ",")]
        delimiter: char,
    },
    /// Choose a signalling threshold by simulating in-control streams.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Defaults to `calibration.replicates` in the config.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, default_value = "step=0.005")]
        grid: String,
        #[arg(long, default_value = "closest=1")]
        target: String,
        #[arg(long)]
        particles: Option<usize>,
        /// Calibration record (JSON); written to standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute one of the benchmark tables.
    Reproduce {
        /// table1 .. table6 or fig1.
        table: String,
        #[arg(long)]
        seed: u64,
        /// Multiplies every replicate count.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Output directory; the table is printed if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "step=0.005")]
        grid: String,
        /// Comma-separated particle counts.
        #[arg(long)]
        particles: Option<String>,
        /// Fixed threshold for table1 and table3.
        #[arg(long, default_value_t = bayesmon::experiments::BASELINE_DELTA)]
        delta: f64,
        /// Wine quality file for table6.
        #[arg(long, env = "WINE_DATA")]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        split_seed: u64,
    },
    /// Write one realization of a named scenario.
    Simulate {
        scenario: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        phase1_out: Option<PathBuf>,
    },
    /// Check that a file written by this tool has the documented layout.
    SchemaCheck { kind: String, file: PathBuf },
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_line(w: &mut dyn Write, cells: &[String]) -> io::Result<()> {
    writeln!(w, "{}", cells.join(","))
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("BAYESMON_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Usage(format!("BAYESMON_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_monitor(
    config: &Path,
    input: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
    delta: Option<f64>,
    record: Option<&Path>,
    particles: Option<usize>,
    delimiter: char,
) -> Result<(), Failure> {
    let mut loaded = config::load(config)?;
    if let Some(p) = particles {
        loaded.config.particles.count = p;
    }
    let th = &loaded.config.threshold;
    let delta = match (delta, record) {
        (Some(d), _) => d,
        (None, Some(r)) => calibrate::read_record(r)?.result.delta,
        (None, None) => match (th.delta, &th.calibration_record) {
            (Some(d), None) => d,
            (None, Some(r)) => calibrate::read_record(&loaded.resolve(r))?.result.delta,
            (Some(_), Some(_)) => {
                return Err(Failure::Usage("[threshold] sets both delta and calibration_record".into()))
            }
            (None, None) => return Err(Failure::Usage("no threshold: set [threshold] or pass --delta".into())),
        },
    };
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Failure::Usage(format!("threshold must lie in (0,1), got {delta}")));
    }
    if !delimiter.is_ascii() {
        return Err(Failure::Usage("delimiter must be an ASCII character".into()));
    }
    let resolved = monitor::Resolved::new(&loaded, delta)?;
    if resolved.is_stochastic() && seed.is_none() {
        return Err(Failure::Usage("--seed is required for particle-filter models".into()));
    }
    let mut engine = resolved.engine(seed.map(|s| RngStream::root(s).named("monitor")))?;
    let source: Box<dyn io::Read> = match input {
        Some(p) if p != Path::new("-") => Box::new(
            File::open(p).map_err(|e| Failure::MissingData(format!("cannot open input {}: {e}", p.display())))?,
        ),
        _ => Box::new(io::stdin().lock()),
    };
    let mut w = open_output(out)?;
    write_line(&mut *w, &resolved.header().iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    w.flush()?;
    for item in input::ObservationReader::new(source, delimiter as u8, resolved.dimension()) {
        let (row, y) = item?;
        let rec = engine.step_values(&y).map_err(|e| match e {
            bayesmon::Error::Domain(m) | bayesmon::Error::Data(m) => Failure::Parse(format!("row {row}: {m}")),
            other => Failure::from(other).context(&format!("row {row}")),
        })?;
        write_line(&mut *w, &rec.cells())?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_calibrate(
    config: &Path,
    seed: u64,
    replicates: Option<usize>,
    grid: &str,
    target: &str,
    particles: Option<usize>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut loaded = config::load(config)?;
    if let Some(p) = particles {
        loaded.config.particles.count = p;
    }
    let grid = calibrate::parse_grid(grid)?;
    let target = calibrate::parse_target(target)?;
    let b = replicates.unwrap_or(loaded.config.calibration.replicates);
    let rec = calibrate::calibrate(&loaded, seed, b, &grid, target)?;
    let r = &rec.result;
    eprintln!(
        "delta={} achieved_episodes={} mcse={} mean_timepoints={} replicates={}",
        g17(r.delta),
        g17(r.achieved_episodes),
        g17(r.mcse),
        g17(r.mean_timepoints),
        r.replicates
    );
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, &rec).map_err(io::Error::other)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_table(dir: &Path, name: &str, t: &TextTable) -> Result<PathBuf, Failure> {
    let p = dir.join(format!("{name}.csv"));
    std::fs::write(&p, t.to_csv()).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
    Ok(p)
}

fn cmd_reproduce(req: reproduce::Request, out: Option<&Path>) -> Result<(), Failure> {
    let output = reproduce::run(&req)?;
    match out {
        None => {
            let mut w = open_output(None)?;
            for (i, (name, t)) in output.tables.iter().enumerate() {
                if i > 0 {
                    writeln!(w, "# {name}")?;
                }
                w.write_all(t.to_csv().as_bytes())?;
            }
            w.flush()?;
        }
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
            let mut files = Vec::new();
            for (name, t) in &output.tables {
                write_table(dir, name, t)?;
                files.push(format!("{name}.csv"));
            }
            let params = serde_json::to_string(&output.parameters).expect("json");
            let manifest = serde_json::json!({
                "software_version": env!("CARGO_PKG_VERSION"),
                "parameters": output.parameters,
                "config_sha256": calibrate::sha256_hex(&params),
                "outputs": files,
            });
            let p = dir.join(format!("{}.manifest.json", req.table));
            let text = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
            std::fs::write(&p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
        }
    }
    Ok(())
}

fn cmd_simulate(scenario: &str, seed: u64, out: Option<&Path>, phase1_out: Option<&Path>) -> Result<(), Failure> {
    let spec = named_scenario(scenario).map_err(|_| {
        Failure::Usage(format!(
            "unknown scenario {scenario:?}; expected one of {}",
            SCENARIO_NAMES.join(", ")
        ))
    })?;
    let r = generate_scenario(&spec, RngStream::root(seed).named("simulate"))?;
    let mut w = open_output(out)?;
    write_line(&mut *w, &schema::SIMULATE_HEADER.map(String::from))?;
    for i in 0..r.observations.len() {
        write_line(
            &mut *w,
            &[
                (i + 1).to_string(),
                g17(r.observations[i]),
                g17(r.latent[i]),
                u8::from(r.in_control[i]).to_string(),
            ],
        )?;
    }
    w.flush()?;
    if let Some(p) = phase1_out {
        let mut w = open_output(Some(p))?;
        write_line(&mut *w, &schema::PHASE1_HEADER.map(String::from))?;
        for (i, y) in r.phase1.iter().enumerate() {
            write_line(&mut *w, &[(i + 1).to_string(), g17(*y)])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_schema_check(kind: &str, file: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| Failure::MissingData(format!("cannot read {}: {e}", file.display())))?;
    let n = schema::check(kind, &text).map_err(|e| e.context(&file.display().to_string()))?;
    println!("{}: {kind} ok ({n} rows)", file.display());
    Ok(())
}

fn parse_particles(s: &str) -> Result<Vec<usize>, Failure> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("bad --particles {s:?}; expected e.g. 500,2000")))?;
    if v.is_empty() || v.contains(&0) {
        return Err(Failure::Usage("particle counts must be positive".into()));
    }
    Ok(v)
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Monitor {
            config,
            input,
            out,
            seed,
            delta,
            calibration_record,
            particles,
            delimiter,
        } => cmd_monitor(
            &config,
            input.as_deref(),
            out.as_deref(),
            seed,
            delta,
            calibration_record.as_deref(),
            particles,
            delimiter,
        ),
        Command::Calibrate {
            config,
            seed,
            replicates,
            grid,
            target,
            particles,
            out,
        } => cmd_calibrate(&config, seed, replicates, &grid, &target, particles, out.as_deref()),
        Command::Reproduce {
            table,
            seed,
            scale,
            out,
            grid,
            particles,
            delta,
            data,
            split_seed,
        } => {
            let req = reproduce::Request {
                table,
                seed,
                scale,
                grid: calibrate::parse_grid(&grid)?,
                particles: particles.as_deref().map(parse_particles).transpose()?,
                delta,
                data,
                split_seed,
            };
            cmd_reproduce(req, out.as_deref())
        }
        Command::Simulate {
            scenario,
            seed,
            out,
            phase1_out,
        } => cmd_simulate(&scenario, seed, out.as_deref(), phase1_out.as_deref()),
        Command::SchemaCheck { kind, file } => cmd_schema_check(&kind, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bayesmon: error: {e}");
            ExitCode::from(e.code())
        }
    }
}
