//! CSV ingestion and result tables.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::learning::{EpochRecord, PairwiseDataset};

/// One table cell. Floats are written with `{:?}`, the shortest string
/// that parses back to the same bits.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn parse(cell: &str) -> Value {
        if cell.is_empty() {
            Value::Empty
        } else if let Ok(i) = cell.parse::<i64>() {
            Value::Int(i)
        } else if let Ok(x) = cell.parse::<f64>() {
            Value::Float(x)
        } else {
            Value::Text(cell.to_string())
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Text(s) => f.write_str(s),
            Value::Empty => Ok(()),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<u64> for Value {
    fn from(i: u64) -> Self {
        Value::Int(i as i64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Empty, Into::into)
    }
}

/// A rectangular table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        ResultTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics if the row width differs from the header.
    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&Value> {
        self.rows.get(row)?.get(self.column_index(column)?)
    }

    /// Rows whose `column` holds the text `value`.
    pub fn filter<'a>(&'a self, column: &str, value: &'a str) -> impl Iterator<Item = &'a [Value]> + 'a {
        let idx = self.column_index(column);
        self.rows
            .iter()
            .filter(move |r| idx.is_some_and(|i| r[i].as_str() == Some(value)))
            .map(Vec::as_slice)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Value::to_string))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut table = ResultTable::new(columns);
        for rec in r.records() {
            let rec = rec?;
            table.rows.push(rec.iter().map(Value::parse).collect());
        }
        Ok(table)
    }
}

pub fn write_results(path: &Path, table: &ResultTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    table.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<ResultTable> {
    ResultTable::read_from(File::open(path)?)
}

/// Loads a dataset whose header names the columns and whose last column is
/// the label; every other column is a numeric feature.
pub fn read_csv_dataset(path: &Path) -> Result<PairwiseDataset> {
    parse_dataset(File::open(path)?)
}

pub fn parse_dataset<R: Read>(input: R) -> Result<PairwiseDataset> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            column: header.first().cloned().unwrap_or_default(),
            message: "need at least one feature column and a label column".into(),
        });
    }
    let p = header.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |pos| pos.line());
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: header[j].clone(),
                message: format!("not a number: {cell:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: header[j].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            if j < p {
                features.push(x);
            } else {
                labels.push(x);
            }
        }
    }
    PairwiseDataset::from_flat(p, features, labels)
}

/// Trace columns `epoch, median_block_risk, train_risk, test_risk`.
pub fn trace_table(trace: &[EpochRecord]) -> ResultTable {
    let mut t = ResultTable::new(["epoch", "median_block_risk", "train_risk", "test_risk"]);
    for r in trace {
        t.push(vec![
            r.epoch.into(),
            r.median_block_risk.into(),
            r.train_risk.into(),
            r.test_risk.into(),
        ]);
    }
    t
}
