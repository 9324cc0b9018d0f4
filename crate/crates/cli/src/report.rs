//! Tabular command output in CSV or JSON.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::document::Format;
use crate::CliError;

/// A named table; JSON output is an array of objects keyed by the headers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, headers: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Table { name: name.to_string(), headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    pub fn to_json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self.headers.iter().cloned().zip(row.iter().cloned()).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Finite floats become JSON numbers; anything else is written as text.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

pub fn int(x: usize) -> Value {
    Value::from(x as u64)
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub summary: Vec<String>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }

    /// With an output directory every table goes to `<dir>/<name>.<ext>` and
    /// the summary to `out`; otherwise everything goes to `out`.
    pub fn emit(&self, dir: Option<&Path>, format: Format, out: &mut impl Write) -> Result<(), CliError> {
        match dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                for t in &self.tables {
                    let (bytes, ext) = match format {
                        Format::Csv => (t.to_csv()?, "csv"),
                        Format::Json => (pretty(&t.to_json_value()), "json"),
                    };
                    std::fs::write(dir.join(format!("{}.{ext}", t.name)), bytes)?;
                }
                for s in &self.summary {
                    writeln!(out, "{s}")?;
                }
            }
            None => match format {
                Format::Csv => {
                    for s in &self.summary {
                        writeln!(out, "{s}")?;
                    }
                    for t in &self.tables {
                        writeln!(out, "\n[{}]", t.name)?;
                        out.write_all(&t.to_csv()?)?;
                    }
                }
                Format::Json => {
                    let mut obj = Map::new();
                    obj.insert("summary".into(), Value::from(self.summary.clone()));
                    for t in &self.tables {
                        obj.insert(t.name.clone(), t.to_json_value());
                    }
                    out.write_all(&pretty(&Value::Object(obj)))?;
                }
            },
        }
        Ok(())
    }
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("values always serialize");
    s.push(b'\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("region", ["method", "p1", "R_1"]);
        t.push(vec![text("iw"), num(10.0), num(2.5)]);
        t.push(vec![text("a,b"), int(3), num(f64::NAN)]);
        t
    }

    #[test]
    fn csv_quotes_and_formats() {
        let csv = String::from_utf8(sample().to_csv().unwrap()).unwrap();
        assert_eq!(csv, "method,p1,R_1\niw,10.0,2.5\n\"a,b\",3,NaN\n");
    }

    #[test]
    fn json_rows_are_keyed_by_header() {
        let v = sample().to_json_value();
        assert_eq!(v[0]["method"], "iw");
        assert_eq!(v[0]["R_1"], 2.5);
        assert_eq!(v[1]["R_1"], "NaN");
    }

    #[test]
    fn directory_output_writes_one_file_per_table() {
        let dir = tempfile::tempdir().unwrap();
        let report = Report { summary: vec!["done".into()], tables: vec![sample()] };
        let mut out = Vec::new();
        report.emit(Some(dir.path()), Format::Csv, &mut out).unwrap();
        assert_eq!(out, b"done\n");
        assert!(dir.path().join("region.csv").exists());
    }
}
