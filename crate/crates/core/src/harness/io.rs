//! CSV data files and versioned JSON configs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::points::Points;
use crate::regression::DataSet;
use crate::testing::TestReport;

pub const SCHEMA_VERSION: u64 = 1;

fn header_split(path: &Path, header: &csv::StringRecord) -> Result<(usize, usize)> {
    let bad = |msg: String| Error::input(format!("{}:1: {msg}", path.display()));
    let mut d = 0;
    let mut q = 0;
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if q == 0 && name == format!("x_{}", d + 1) {
            d += 1;
        } else if d > 0 && name == format!("z_{}", q + 1) {
            q += 1;
        } else {
            return Err(bad(format!(
                "column {} is '{name}'; expected a header x_1..x_d followed by z_1..z_q",
                i + 1
            )));
        }
    }
    if d == 0 || q == 0 {
        return Err(bad("header needs at least one x_ and one z_ column".into()));
    }
    Ok((d, q))
}

/// Reads pairs from a CSV with header `x_1..x_d, z_1..z_q`.
pub fn read_dataset(path: &Path) -> Result<DataSet> {
    let file = File::open(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    parse_dataset(path, file)
}

pub fn parse_dataset(path: &Path, source: impl std::io::Read) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| Error::input(format!("{}:1: {e}", path.display())))?
        .clone();
    let (d, q) = header_split(path, &header)?;
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::input(format!("{}:{line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + q {
            return Err(Error::input(format!(
                "{}:{line}: expected {} fields, found {}",
                path.display(),
                d + q,
                record.len()
            )));
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::input(format!("{}:{line}: field {} ('{field}') is not a number", path.display(), i + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::input(format!("{}:{line}: field {} is not finite", path.display(), i + 1)));
            }
            if i < d {
                xs.push(v);
            } else {
                zs.push(v);
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::input(format!("{}: no data rows", path.display())));
    }
    DataSet::new(Points::new(d, xs)?, Points::new(q, zs)?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_dataset(path: &Path, data: &DataSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let d = data.covariates().dim();
    let q = data.measurements().dim();
    let header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).chain((1..=q).map(|i| format!("z_{i}"))).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (x, z) in data.covariates().iter().zip(data.measurements().iter()) {
        w.write_record(x.iter().chain(z).map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes serializable rows with a header taken from field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(path: &Path, report: &TestReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let d = report.records.first().map_or(0, |r| r.x.len());
    let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    header.extend(["statistic", "sigma1", "sigma2", "threshold", "ratio", "reject"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for r in &report.records {
        let mut fields: Vec<String> = r.x.iter().map(f64::to_string).collect();
        fields.extend([r.statistic, r.sigma1, r.sigma2, r.threshold, r.ratio()].map(|v| v.to_string()));
        fields.push(r.reject.to_string());
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Parses a JSON config carrying `"schema_version": 1`.
pub fn parse_config<T: DeserializeOwned>(origin: &str, text: &str) -> Result<T> {
    let mut value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::input(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::input(format!("{origin}: config must be a JSON object")))?;
    match obj.remove("schema_version") {
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::input(format!(
                "{origin}: unsupported schema_version {v}; expected {SCHEMA_VERSION}"
            )))
        }
        None => return Err(Error::input(format!("{origin}: missing schema_version"))),
    }
    serde_json::from_value(value).map_err(|e| Error::input(format!("{origin}: {e}")))
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    parse_config(&path.display().to_string(), &text)
}
