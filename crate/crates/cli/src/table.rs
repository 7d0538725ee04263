//! CSV tables with leading `# key = value` metadata lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    /// `None` is written as an empty field.
    pub rows: Vec<Vec<Option<f64>>>,
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn meta_f64(&self, path: &Path, key: &str) -> Result<f64, CliError> {
        let text = self
            .meta(key)
            .ok_or_else(|| CliError::Data(format!("{}: missing `# {key} = …` header", path.display())))?;
        text.parse()
            .map_err(|_| CliError::Data(format!("{}: header `{key}` is not a number", path.display())))
    }

    /// Values of a column; every row must have one.
    pub fn column(&self, path: &Path, name: &str) -> Result<Vec<f64>, CliError> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: no column `{name}`", path.display())))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[k].ok_or_else(|| {
                    CliError::Data(format!("{}: row {} has no `{name}` value", path.display(), i + 1))
                })
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        let mut w = BufWriter::new(file);
        for (k, v) in &self.meta {
            writeln!(w, "# {k} = {v}").map_err(|e| io_error(path, e))?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.header).map_err(|e| io_error(path, e))?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|v| v.map(fmt_f64).unwrap_or_default()))
                .map_err(|e| io_error(path, e))?;
        }
        csv.flush().map_err(|e| io_error(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let meta = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .filter_map(|l| {
                let (k, v) = l.trim_start_matches('#').split_once('=')?;
                Some((k.trim().to_string(), v.trim().to_string()))
            })
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| io_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| io_error(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(|field| {
                    if field.is_empty() {
                        Ok(None)
                    } else {
                        field.parse().map(Some).map_err(|_| {
                            CliError::Data(format!("{}:{line}: cannot parse `{field}`", path.display()))
                        })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { meta, header, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["x", "value", "std"]).with_meta("mode", "exact");
        t.rows.push(vec![Some(0.1), Some(1e-300), None]);
        t.rows.push(vec![Some(-2.5), Some(1.0 / 3.0), Some(7.0)]);
        t.write(&path).unwrap();
        let back = Table::read(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.meta("mode"), Some("exact"));
        assert!(back.column(&path, "std").is_err());
        assert_eq!(back.column(&path, "x").unwrap(), vec![0.1, -2.5]);
    }

    #[test]
    fn bad_field_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "# a = 1\nx,t\n1,2\n3,oops\n").unwrap();
        let err = Table::read(&path).unwrap_err();
        assert!(matches!(err, CliError::Data(ref m) if m.contains(":4:")), "{err}");
    }
}
