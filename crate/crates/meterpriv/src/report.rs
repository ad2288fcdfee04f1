//! Result tables and their CSV / JSON encodings.
//!
//! Floats are written with 6 significant digits. JSON has the shape
//! `{"columns": [...], "records": [{...}, ...]}` so an empty table keeps
//! its header; non-finite floats become `null` there.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::{Map, Value as Json};

use crate::config::Format;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Int(v) => Some(*v as f64),
            Value::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Num(v) => format!("{v:.5e}"),
            Value::Int(v) => v.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn parse(s: &str) -> Self {
        if let Ok(i) = s.parse::<i64>() {
            Value::Int(i)
        } else if let Ok(v) = s.parse::<f64>() {
            Value::Num(v)
        } else {
            Value::Text(s.to_string())
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Num(v) => {
                let rounded: f64 = self.render().parse().unwrap_or(*v);
                serde_json::Number::from_f64(rounded).map_or(Json::Null, Json::Number)
            }
            Value::Int(v) => Json::from(*v),
            Value::Text(s) => Json::String(s.clone()),
        }
    }

    fn from_json(v: &Json) -> Self {
        match v {
            Json::Null => Value::Num(f64::NAN),
            Json::Number(n) => match n.as_i64() {
                Some(i) => Value::Int(i),
                None => Value::Num(n.as_f64().unwrap_or(f64::NAN)),
            },
            Json::String(s) => Value::Text(s.clone()),
            other => Value::Text(other.to_string()),
        }
    }

    /// Equality after a write/read cycle: numbers compare at the written
    /// precision and all non-finite floats are equal to each other.
    pub fn same(&self, other: &Value) -> bool {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) if !a.is_finite() || !b.is_finite() => {
                !(a.is_finite() || b.is_finite()) || a == b
            }
            (Some(a), Some(b)) => a == b || (a - b).abs() <= 5e-6 * a.abs().max(b.abs()),
            _ => self == other,
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

/// Rows sharing one ordered header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// A numeric column; `None` if absent or if any cell is text.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name)?.into_iter().map(Value::as_f64).collect()
    }

    pub fn same(&self, other: &Table) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.iter().zip(b).all(|(u, v)| u.same(v)))
    }

    pub fn to_bytes(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                // Writing to memory cannot fail.
                w.write_record(&self.columns).expect("csv header");
                for row in &self.rows {
                    w.write_record(row.iter().map(Value::render)).expect("csv row");
                }
                w.into_inner().expect("csv flush")
            }
            Format::Json => {
                let records: Vec<Json> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let m: Map<String, Json> = self.columns.iter().cloned().zip(row.iter().map(Value::to_json)).collect();
                        Json::Object(m)
                    })
                    .collect();
                let mut doc = Map::new();
                doc.insert("columns".into(), Json::from(self.columns.clone()));
                doc.insert("records".into(), Json::Array(records));
                let mut out = serde_json::to_vec_pretty(&Json::Object(doc)).expect("json");
                out.push(b'\n');
                out
            }
        }
    }

    pub fn from_bytes(bytes: &[u8], format: Format, origin: &Path) -> Result<Self> {
        let bad = |line: u64, message: String| HarnessError::Parse {
            path: origin.to_path_buf(),
            line,
            field: String::new(),
            message,
        };
        match format {
            Format::Csv => {
                let mut r = csv::Reader::from_reader(bytes);
                let columns: Vec<String> = r
                    .headers()
                    .map_err(|e| bad(1, e.to_string()))?
                    .iter()
                    .map(str::to_string)
                    .collect();
                let mut rows = Vec::new();
                for rec in r.records() {
                    let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
                    rows.push(rec.iter().map(Value::parse).collect());
                }
                Ok(Table { columns, rows })
            }
            Format::Json => {
                let doc: Json = serde_json::from_slice(bytes).map_err(|e| bad(e.line() as u64, e.to_string()))?;
                let columns: Vec<String> = doc["columns"]
                    .as_array()
                    .ok_or_else(|| bad(0, "missing `columns`".into()))?
                    .iter()
                    .map(|c| c.as_str().unwrap_or_default().to_string())
                    .collect();
                let records = doc["records"].as_array().ok_or_else(|| bad(0, "missing `records`".into()))?;
                let rows = records
                    .iter()
                    .map(|r| columns.iter().map(|c| Value::from_json(&r[c.as_str()])).collect())
                    .collect();
                Ok(Table { columns, rows })
            }
        }
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        let mut f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        f.write_all(&self.to_bytes(format)).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path, format: Format) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| HarnessError::io(path, e))?;
        Self::from_bytes(&bytes, format, path)
    }
}

/// Guesses the format from a file extension.
pub fn format_of(path: &Path) -> Option<Format> {
    match path.extension()?.to_str()? {
        "csv" => Some(Format::Csv),
        "json" => Some(Format::Json),
        _ => None,
    }
}
