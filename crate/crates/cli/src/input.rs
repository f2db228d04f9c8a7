//! Line-at-a-time observation input.
//!
//! Rows are numbered as lines of the file, header included. A first line
//! with any non-numeric selected field is taken as a header. With a header,
//! scalar streams read the `y` column and `d`-vector streams read `y1..yd`
//! when present; otherwise the first `d` columns are used.

use std::io::Read;

use crate::Failure;

pub struct ObservationReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    dim: usize,
    columns: Option<Vec<usize>>,
}

impl<R: Read> ObservationReader<R> {
    pub fn new(source: R, delimiter: u8, dim: usize) -> Self {
        let rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        Self {
            records: rdr.into_records(),
            dim,
            columns: None,
        }
    }

    fn pick_columns(&self, header: &csv::StringRecord) -> Result<Vec<usize>, String> {
        let find = |name: &str| header.iter().position(|h| h == name);
        if self.dim == 1 {
            if let Some(j) = find("y") {
                return Ok(vec![j]);
            }
        } else {
            let named: Option<Vec<usize>> = (1..=self.dim).map(|k| find(&format!("y{k}"))).collect();
            if let Some(c) = named {
                return Ok(c);
            }
        }
        if header.len() < self.dim {
            return Err(format!("header has {} columns, need {}", header.len(), self.dim));
        }
        Ok((0..self.dim).collect())
    }

    fn parse_fields(&self, rec: &csv::StringRecord, cols: &[usize]) -> Option<Vec<f64>> {
        cols.iter()
            .map(|&j| rec.get(j).and_then(|f| f.parse::<f64>().ok()))
            .collect()
    }
}

impl<R: Read> Iterator for ObservationReader<R> {
    /// `(row, values)`.
    type Item = Result<(u64, Vec<f64>), Failure>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let rec = match self.records.next()? {
                Ok(r) => r,
                Err(e) => {
                    let row = e.position().map_or(0, |p| p.line());
                    return Some(Err(Failure::Parse(format!("row {row}: {e}"))));
                }
            };
            let row = rec.position().map_or(0, |p| p.line());
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            let cols = match &self.columns {
                Some(c) => c.clone(),
                None => {
                    let default: Vec<usize> = (0..self.dim).collect();
                    if self.parse_fields(&rec, &default).is_some() {
                        self.columns = Some(default.clone());
                        default
                    } else {
                        match self.pick_columns(&rec) {
                            Ok(c) => {
                                self.columns = Some(c);
                                continue;
                            }
                            Err(e) => return Some(Err(Failure::Parse(format!("row {row}: {e}")))),
                        }
                    }
                }
            };
            return Some(match self.parse_fields(&rec, &cols) {
                Some(v) if v.iter().all(|x| x.is_finite()) => Ok((row, v)),
                Some(_) => Err(Failure::Parse(format!("row {row}: non-finite value"))),
                None => Err(Failure::Parse(format!(
                    "row {row}: expected {} numeric value(s) in column(s) {:?}, got {:?}",
                    self.dim,
                    cols.iter().map(|c| c + 1).collect::<Vec<_>>(),
                    rec.iter().collect::<Vec<_>>()
                ))),
            });
        }
    }
}

/// Read a whole scalar column (Phase I files).
pub fn read_scalar_file(path: &std::path::Path) -> Result<Vec<f64>, Failure> {
    let f = std::fs::File::open(path).map_err(|e| Failure::MissingData(format!("{}: {e}", path.display())))?;
    ObservationReader::new(std::io::BufReader::new(f), b',', 1)
        .map(|r| r.map(|(_, v)| v[0]).map_err(|e| e.context(&path.display().to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, dim: usize) -> Vec<Result<(u64, Vec<f64>), Failure>> {
        ObservationReader::new(text.as_bytes(), b',', dim).collect()
    }

    #[test]
    fn headerless_and_headed() {
        let r = read("1.5\n2\n", 1);
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].as_ref().unwrap(), &(2, vec![2.0]));
        let r = read("t,y,theta\n1,4.5,10\n2,5.5,10\n", 1);
        assert_eq!(r[0].as_ref().unwrap(), &(2, vec![4.5]));
        let r = read("a,y2,y1\n1,2,3\n", 2);
        assert_eq!(r[0].as_ref().unwrap().1, vec![3.0, 2.0]);
    }

    #[test]
    fn bad_row_is_named() {
        let mut text = String::new();
        for i in 1..=20 {
            text.push_str(if i == 17 { "oops\n" } else { "1.0\n" });
        }
        let r = read(&text, 1);
        let e = r.into_iter().find_map(Result::err).unwrap();
        assert!(matches!(&e, Failure::Parse(m) if m.starts_with("row 17:")), "{e:?}");
    }

    #[test]
    fn empty_input_yields_nothing() {
        assert!(read("", 1).is_empty());
        assert!(read("y\n", 1).is_empty());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(read("1\ninf\n", 1)[1].is_err());
    }
}
