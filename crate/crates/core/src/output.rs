//! CSV channel tables and their column manifests.
//!
//! Values are written with 17 significant digits so that parsing a file
//! reproduces the in-memory numbers bit for bit.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: &'static str,
    pub description: String,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: &'static str, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            unit,
            description: description.into(),
        }
    }
}

impl ChannelTable {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    /// One line per column: index, name, unit, description.
    pub fn manifest(&self) -> String {
        let mut out = String::from("index\tname\tunit\tdescription\n");
        for (j, c) in self.columns.iter().enumerate() {
            writeln!(out, "{j}\t{}\t{}\t{}", c.name, c.unit, c.description).expect("writing to a String cannot fail");
        }
        out
    }

    pub fn write(&self, csv_path: &Path, manifest_path: &Path) -> Result<()> {
        std::fs::File::create(csv_path)?.write_all(self.to_csv().as_bytes())?;
        std::fs::File::create(manifest_path)?.write_all(self.manifest().as_bytes())?;
        Ok(())
    }
}

/// Parses a CSV written by [`ChannelTable::to_csv`] into header and rows.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let row = l
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|e| Error::Config(format!("bad CSV value {v}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != header.len() {
                return Err(Error::Config("ragged CSV row".into()));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = ChannelTable::new(vec![Column::new("time", "s", "time"), Column::new("x", "pu", "x")]);
        t.push(vec![0.1, std::f64::consts::PI]);
        t.push(vec![1.0 / 3.0, -1.234_567_890_123_456_7e-300]);
        let (header, rows) = parse_csv(&t.to_csv()).unwrap();
        assert_eq!(header, vec!["time", "x"]);
        assert_eq!(rows, t.rows);
    }
}
