use std::path::Path;

use bayesmon::calibration::{calibrate_threshold, threshold_grid, CalibrationResult, CalibrationTarget};
use bayesmon::rng::RngStream;
use serde::{Deserialize, Serialize};

use crate::config::Loaded;
use crate::monitor::Resolved;
use crate::Failure;

pub const RECORD_FORMAT: &str = "bayesmon-calibration";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub format: String,
    pub version: u32,
    pub software_version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub horizon: usize,
    pub result: CalibrationResult,
}

/// `step=0.005`, or an explicit comma-separated list such as `0.25,0.5`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("bad --grid {s:?}; use step=H or a comma-separated list"));
    if let Some(step) = s.strip_prefix("step=") {
        let h: f64 = step.trim().parse().map_err(|_| bad())?;
        return Ok(threshold_grid(h)?);
    }
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err(bad()) } else { Ok(v) })
}

/// `closest=K` or `band=LO:HI`.
pub fn parse_target(s: &str) -> Result<CalibrationTarget, Failure> {
    let bad = || Failure::Usage(format!("bad --target {s:?}; use closest=K or band=LO:HI"));
    if let Some(k) = s.strip_prefix("closest=") {
        let episodes: f64 = k.parse().map_err(|_| bad())?;
        if !(episodes >= 0.0) {
            return Err(bad());
        }
        return Ok(CalibrationTarget::ClosestEpisodes { episodes });
    }
    if let Some(b) = s.strip_prefix("band=") {
        let (lo, hi) = b.split_once(':').ok_or_else(bad)?;
        let lower: f64 = lo.parse().map_err(|_| bad())?;
        let upper: f64 = hi.parse().map_err(|_| bad())?;
        if !(lower <= upper) {
            return Err(bad());
        }
        return Ok(CalibrationTarget::Band { lower, upper });
    }
    Err(bad())
}

pub fn sha256_hex(text: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn calibrate(
    loaded: &Loaded,
    seed: u64,
    replicates: usize,
    grid: &[f64],
    target: CalibrationTarget,
) -> Result<Record, Failure> {
    let resolved = Resolved::new(loaded, 0.5)?;
    let horizon = loaded.config.calibration.horizon;
    if horizon == 0 {
        return Err(Failure::Usage("calibration horizon must be positive".into()));
    }
    let root = RngStream::root(seed).named("calibrate");
    let result = calibrate_threshold(
        |i| resolved.calibration_path(horizon, root.index(i as u64)),
        replicates,
        grid,
        target,
    )?;
    Ok(Record {
        format: RECORD_FORMAT.into(),
        version: RECORD_VERSION,
        software_version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config_sha256: sha256_hex(&loaded.text),
        horizon,
        result,
    })
}

pub fn parse_record(text: &str) -> Result<Record, String> {
    let r: Record = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if r.format != RECORD_FORMAT || r.version != RECORD_VERSION {
        return Err(format!("not a version {RECORD_VERSION} calibration record"));
    }
    if !(r.result.delta > 0.0 && r.result.delta < 1.0) {
        return Err(format!("record threshold {} outside (0,1)", r.result.delta));
    }
    Ok(r)
}

pub fn read_record(path: &Path) -> Result<Record, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read calibration record {}: {e}", path.display())))?;
    parse_record(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}
