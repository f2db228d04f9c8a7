//! Fixed column layouts of every CSV the tool writes.

use bayesmon::experiments::table_header;

use crate::calibrate::parse_record;
use crate::monitor::{CONJUGATE_HEADER, PF_HEADER};
use crate::Failure;

pub const SIMULATE_HEADER: [&str; 4] = ["t", "y", "theta", "in_control"];
pub const PHASE1_HEADER: [&str; 2] = ["t", "y"];

pub const KINDS: [&str; 14] = [
    "monitor-conjugate",
    "monitor-pf",
    "simulate",
    "phase1",
    "table1",
    "table2",
    "table3",
    "table4",
    "table5",
    "fig1",
    "table6",
    "table6_histogram",
    "table6_path",
    "calibration-record",
];

// Label columns; every other cell must be numeric (NA, NaN and inf allowed).
const TEXT_COLUMNS: [&str; 3] = ["scenario", "threshold", "quantity"];

pub fn expected_header(kind: &str) -> Option<Vec<String>> {
    let owned = |h: &[&str]| h.iter().map(|s| s.to_string()).collect();
    Some(match kind {
        "monitor-conjugate" => owned(&CONJUGATE_HEADER),
        "monitor-pf" => owned(&PF_HEADER),
        "simulate" => owned(&SIMULATE_HEADER),
        "phase1" => owned(&PHASE1_HEADER),
        "table6" => owned(&["quantity", "value", "mcse"]),
        "table6_histogram" => owned(&["lower", "upper", "quality7", "quality6"]),
        "table6_path" => owned(&["t", "p", "signal"]),
        other => table_header(other)?,
    })
}

fn numeric_cell(s: &str) -> bool {
    matches!(s, "NA" | "NaN" | "inf" | "-inf") || s.parse::<f64>().is_ok()
}

/// Validate `text` against the layout of `kind`; returns the number of data rows.
pub fn check(kind: &str, text: &str) -> Result<usize, Failure> {
    if kind == "calibration-record" {
        return parse_record(text).map(|_| 1).map_err(Failure::Parse);
    }
    let header = expected_header(kind)
        .ok_or_else(|| Failure::Usage(format!("unknown schema {kind:?}; expected one of {}", KINDS.join(", "))))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r.map_err(|e| Failure::Parse(format!("row 1: {e}")))?,
        None => return Err(Failure::Parse("row 1: missing header".into())),
    };
    let got: Vec<&str> = first.iter().collect();
    if got != header {
        return Err(Failure::Parse(format!("row 1: header {got:?} does not match {header:?}")));
    }
    let text_cols: Vec<bool> = header.iter().map(|h| TEXT_COLUMNS.contains(&h.as_str())).collect();
    let mut n = 0;
    for rec in records {
        let rec = rec.map_err(|e| Failure::Parse(format!("{e}")))?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Failure::Parse(format!(
                "row {row}: {} fields, expected {}",
                rec.len(),
                header.len()
            )));
        }
        for (j, cell) in rec.iter().enumerate() {
            if !text_cols[j] && !numeric_cell(cell) {
                return Err(Failure::Parse(format!("row {row}: column {} is not numeric: {cell:?}", header[j])));
            }
        }
        n += 1;
    }
    Ok(n)
}
