//! CSV and JSON rendering of result records.
//!
//! Floats are written with 15 significant digits and absent values are empty
//! CSV cells or JSON `null`. Files are written to a sibling temporary path
//! and renamed into place, so a failed write never leaves a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::group::PrimeClass;
use crate::survey::{SurveyRecord, Table1Record};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(&'static str),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_sig15(*v),
            Cell::Text(s) => (*s).to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            // round-trip through the 15-digit string; the shortest repr of the
            // result never needs more digits
            Cell::Float(v) => format_sig15(*v)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Text(s) => Value::from(*s),
            Cell::Empty => Value::Null,
        }
    }
}

fn opt_float(v: Option<f64>) -> Cell {
    v.map_or(Cell::Empty, Cell::Float)
}

fn opt_int(v: Option<u64>) -> Cell {
    v.map_or(Cell::Empty, Cell::Int)
}

/// A record type with a fixed column layout.
pub trait ReportRow {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<Cell>;
}

impl ReportRow for SurveyRecord {
    const HEADER: &'static [&'static str] = &[
        "prime",
        "class",
        "family",
        "order",
        "mode",
        "n",
        "replicates",
        "statistic",
        "p_value",
        "proportion_lower",
        "distance_to_center",
        "relative_distance",
        "sample_seed",
        "null_seed",
    ];

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.prime),
            Cell::Text(self.class.as_str()),
            Cell::Text(self.family.as_str()),
            Cell::Int(self.order),
            Cell::Text(self.mode.as_str()),
            Cell::Int(self.n),
            opt_int(self.replicates.map(|r| r as u64)),
            Cell::Float(self.statistic),
            opt_float(self.p_value),
            opt_float(self.proportion_lower),
            opt_float(self.distance_to_center),
            opt_float(self.relative_distance),
            opt_int(self.sample_seed),
            opt_int(self.null_seed),
        ]
    }
}

impl ReportRow for Table1Record {
    const HEADER: &'static [&'static str] = &[
        "n",
        "sample_entropy",
        "proportion_lower",
        "distance_to_center",
        "relative_distance",
    ];

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.n),
            Cell::Float(self.sample_entropy),
            Cell::Float(self.proportion_lower),
            Cell::Float(self.distance_to_center),
            Cell::Float(self.relative_distance),
        ]
    }
}

impl ReportRow for PrimeClass {
    const HEADER: &'static [&'static str] = &["prime", "class"];

    fn cells(&self) -> Vec<Cell> {
        vec![Cell::Int(self.prime), Cell::Text(self.class.as_str())]
    }
}

/// `%.15g`-style formatting: 15 significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-5, 1e15)`.
pub fn format_sig15(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn render_csv<R: ReportRow>(records: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("csv encoding failed: {e}"));
    w.write_record(R::HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record(r.cells().iter().map(Cell::csv)).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv encoding failed: {e}")))
}

pub fn render_json<R: ReportRow>(records: &[R]) -> Vec<u8> {
    let rows: Vec<Value> = records
        .iter()
        .map(|r| {
            let obj: Map<String, Value> = R::HEADER
                .iter()
                .zip(r.cells())
                .map(|(k, c)| ((*k).to_string(), c.json()))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&rows).expect("json values always serialise");
    out.push(b'\n');
    out
}

pub fn render<R: ReportRow>(records: &[R], format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Csv => render_csv(records),
        ReportFormat::Json => Ok(render_json(records)),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary sibling file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "not a file path"),
        })?
        .to_string_lossy()
        .into_owned();
    let tmp: PathBuf = path.with_file_name(format!(".{file_name}.partial"));
    let result = (|| {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn emit_report<R: ReportRow>(records: &[R], format: ReportFormat, path: &Path) -> Result<()> {
    write_atomic(path, &render(records, format)?)
}
