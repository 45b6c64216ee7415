use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter};
use serde_json::Value;

use crate::args::Format;
use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub schema_version: String,
    pub command: String,
    pub query: Value,
    pub results: Value,
}

impl OutputRecord {
    pub fn new(command: &str, query: impl Serialize, results: impl Serialize) -> Result<Self, CliError> {
        Ok(Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            query: serde_json::to_value(query)?,
            results: serde_json::to_value(results)?,
        })
    }
}

/// Writes every `f64` with 17 significant digits, which always reads back
/// to the same value.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn write_null<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(writer)
    }
}

/// `value` in scientific notation with 17 significant digits.
pub fn fmt17(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn to_json_line(record: &OutputRecord) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    record.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) if v.is_finite() => fmt17(*v),
            Cell::Float(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Report {
    pub records: Vec<OutputRecord>,
    pub table: Option<Table>,
    pub summary: Vec<String>,
    /// A region or validity check failed; the records are still written.
    pub validity_failed: bool,
}

pub fn write_report(report: &Report, format: Format, out: &mut impl Write) -> Result<(), CliError> {
    match format {
        Format::Json | Format::Ndjson => {
            for record in &report.records {
                writeln!(out, "{}", to_json_line(record)?)?;
            }
        }
        Format::Csv => {
            let table = report.table.as_ref().ok_or_else(|| {
                CliError::Usage("csv output is only available for compare and figure".into())
            })?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::render))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
