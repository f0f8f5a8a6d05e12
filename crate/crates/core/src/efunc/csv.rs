use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use crate::efunc::{EFunction, FunctionClass, FunctionKind};
use crate::error::{Error, Result};
use crate::real::Real;

/// Loads a sampled function from a CSV file with header `x,f` and strictly
/// decreasing positive `x`.
pub fn from_csv<T: Real>(path: impl AsRef<Path>) -> Result<EFunction<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut f = from_csv_reader(file)?;
    f.description = format!("samples from {}", path.display());
    Ok(f)
}

pub fn from_csv_reader<T: Real, R: Read>(reader: R) -> Result<EFunction<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "f" {
        return Err(Error::Csv {
            line: 1,
            message: format!(
                "expected header `x,f`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut log_x: Vec<T> = Vec::new();
    let mut values: Vec<T> = Vec::new();
    let mut prev_x: Option<T> = None;
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Csv {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Csv {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let parse = |s: &str| -> Result<T> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .and_then(T::from_f64)
                .ok_or_else(|| Error::Csv {
                    line,
                    message: format!("not a finite number: `{s}`"),
                })
        };
        let x = parse(&record[0])?;
        let v = parse(&record[1])?;
        if !(x > T::zero()) {
            return Err(Error::Csv {
                line,
                message: format!("x must be positive, got {x}"),
            });
        }
        if let Some(p) = prev_x {
            if !(x < p) {
                return Err(Error::Csv {
                    line,
                    message: format!("x column must be strictly decreasing ({p} then {x})"),
                });
            }
        }
        prev_x = Some(x);
        log_x.push(-x.ln());
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Csv {
            line: 1,
            message: "no data rows".into(),
        });
    }

    let n = values.len();
    let table = Arc::new(SampleTable { log_x, values });
    Ok(EFunction::from_parts(
        FunctionKind::Sampled { nodes: n },
        FunctionClass::E,
        format!("{n} samples"),
        Arc::new(move |x| table.eval(x)),
    ))
}

/// Samples indexed by `u = -ln x`, ascending.
struct SampleTable<T> {
    log_x: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> SampleTable<T> {
    fn eval(&self, x: T) -> Result<T> {
        let u = -x.ln();
        let first = self.log_x[0];
        let last = *self.log_x.last().unwrap();
        let out_of_range = || Error::Eval {
            x: x.as_f64(),
            reason: format!(
                "outside sampled range [{}, {}]",
                (-last).exp(),
                (-first).exp()
            ),
        };
        if u < first || u > last || u.is_nan() {
            return Err(out_of_range());
        }
        let idx = self.log_x.partition_point(|&v| v < u);
        if self.log_x[idx] == u {
            return Ok(self.values[idx]);
        }
        // idx > 0 since u > first here.
        let (u0, u1) = (self.log_x[idx - 1], self.log_x[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        let t = (u - u0) / (u1 - u0);
        Ok(v0 + t * (v1 - v0))
    }
}
