use std::path::PathBuf;

use bayesmon::experiments::{self as ex, scaled};
use bayesmon::format::{g17, TextTable};
use bayesmon::wine::{read_wine, wine_pipeline, WineConfig};
use serde_json::json;

use crate::Failure;

pub const TABLES: [&str; 7] = ["table1", "table2", "table3", "table4", "table5", "table6", "fig1"];

pub struct Request {
    pub table: String,
    pub seed: u64,
    pub scale: f64,
    pub grid: Vec<f64>,
    pub particles: Option<Vec<usize>>,
    pub delta: f64,
    pub data: Option<PathBuf>,
    pub split_seed: u64,
}

/// Named output tables plus the parameters recorded in the manifest.
pub struct Output {
    pub tables: Vec<(String, TextTable)>,
    pub parameters: serde_json::Value,
}

pub fn path_table(path: &[f64], delta: f64) -> TextTable {
    let mut t = TextTable::new(["t", "p", "signal"]);
    for (i, &p) in path.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), g17(p), u8::from(p < delta).to_string()]);
    }
    t
}

pub fn run(req: &Request) -> Result<Output, Failure> {
    if !(req.scale > 0.0 && req.scale.is_finite()) {
        return Err(Failure::Usage(format!("--scale must be positive, got {}", req.scale)));
    }
    let (s, seed) = (req.scale, req.seed);
    let particles = |default: &[usize]| req.particles.clone().unwrap_or_else(|| default.to_vec());
    let mut params = json!({
        "table": req.table,
        "seed": seed,
        "scale": s,
    });
    let tables = match req.table.as_str() {
        "table1" => {
            params["delta"] = json!(req.delta);
            vec![("table1".to_string(), ex::table1(s, seed, req.delta)?.to_table())]
        }
        "table2" => {
            params["grid_points"] = json!(req.grid.len());
            vec![("table2".into(), ex::table2_text(&ex::table2(s, seed, &req.grid)?))]
        }
        "table3" => {
            params["delta"] = json!(req.delta);
            vec![("table3".into(), ex::table3_text(&ex::table3(s, seed, req.delta)?, req.delta))]
        }
        "table4" => {
            let p = particles(&[500, 2000, 5000]);
            params["particles"] = json!(p);
            vec![("table4".into(), ex::table4_text(&ex::table4(s, seed, &p)?))]
        }
        "table5" => {
            let p = particles(&[1000, 5000]);
            params["particles"] = json!(p);
            vec![("table5".into(), ex::table5_text(&ex::table5(s, seed, &req.grid, &p)?))]
        }
        "fig1" => vec![("fig1".into(), ex::figure1(seed)?)],
        "table6" => {
            let path = req
                .data
                .as_ref()
                .ok_or_else(|| Failure::MissingData("table6 needs the wine data file (--data or WINE_DATA)".into()))?;
            if !path.is_file() {
                return Err(Failure::MissingData(format!("wine data file {} not found", path.display())));
            }
            let data = read_wine(path).map_err(|e| Failure::from(e).context(&path.display().to_string()))?;
            let base = WineConfig::default();
            let cfg = WineConfig {
                split_seed: req.split_seed,
                particles: req.particles.as_ref().and_then(|p| p.first().copied()).unwrap_or(base.particles),
                calibration_sequences: scaled(base.calibration_sequences, s),
                evaluation_sequences: scaled(base.evaluation_sequences, s),
                ..base
            };
            params["wine"] = serde_json::to_value(&cfg).expect("serializable config");
            let r = wine_pipeline(&data, &cfg, seed)?;
            vec![
                ("table6".into(), r.to_table()),
                ("table6_histogram".into(), r.histogram(40)),
                ("table6_path".into(), path_table(&r.example_path, r.calibration.delta)),
            ]
        }
        other => {
            return Err(Failure::Usage(format!(
                "unknown table {other:?}; expected one of {}",
                TABLES.join(", ")
            )))
        }
    };
    Ok(Output {
        tables,
        parameters: params,
    })
}
