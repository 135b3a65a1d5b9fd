//! CSV ingestion: header row, comma separator, '.' decimals. Empty cells and
//! the strings `NA` / `NaN` are missing.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use mnar_pcor::{Dataset, Roles};

use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone)]
pub struct ColumnRoles {
    pub target: String,
    pub partner: String,
    pub adjusters: Vec<String>,
}

impl ColumnRoles {
    fn all(&self) -> Vec<&str> {
        let mut v = vec![self.target.as_str(), self.partner.as_str()];
        v.extend(self.adjusters.iter().map(String::as_str));
        v
    }

    fn check_disjoint(&self) -> CliResult<()> {
        let all = self.all();
        for (i, a) in all.iter().enumerate() {
            if a.is_empty() {
                return Err(Failure::usage("column names must be non-empty"));
            }
            if all[..i].contains(a) {
                return Err(Failure::usage(format!("column '{a}' is assigned more than one role")));
            }
        }
        Ok(())
    }
}

pub fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN")
}

fn parse_cell(cell: &str, line: u64, column: &str) -> CliResult<Option<f64>> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Failure::usage(format!("line {line}, column '{column}': '{cell}' is not a finite number"))),
    }
}

/// Reads the role columns of `path` into a dataset ordered as
/// (target, partner, adjusters…).
pub fn read_dataset(path: &Path, roles: &ColumnRoles) -> CliResult<Dataset> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Failure::unreadable(format!("cannot read {}: {e}", path.display())))?;
    parse_dataset(&text, roles)
}

pub fn parse_dataset(text: &str, roles: &ColumnRoles) -> CliResult<Dataset> {
    roles.check_disjoint()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Failure::unreadable(format!("malformed CSV header: {e}")))?.clone();
    if headers.is_empty() {
        return Err(Failure::unreadable("CSV file has no header row"));
    }
    let names = roles.all();
    let mut index = Vec::with_capacity(names.len());
    for name in &names {
        let hits: Vec<usize> = headers.iter().enumerate().filter(|(_, h)| h.trim() == *name).map(|(i, _)| i).collect();
        match hits.as_slice() {
            [i] => index.push(*i),
            [] => return Err(Failure::usage(format!("column '{name}' not found in header"))),
            _ => return Err(Failure::usage(format!("column '{name}' appears more than once in header"))),
        }
    }

    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Failure::unreadable(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        for (k, &i) in index.iter().enumerate() {
            columns[k].push(parse_cell(&record[i], line, names[k])?);
        }
    }
    if columns[0].is_empty() {
        return Err(Failure::usage("CSV file has no data rows"));
    }

    let incomplete: Vec<usize> =
        (0..columns[0].len()).filter(|&r| columns[2..].iter().any(|c| c[r].is_none())).collect();
    if let Some(first) = incomplete.first() {
        return Err(Failure::usage(format!(
            "{} row(s) have missing adjuster values (first at data row {}); adjusters must be fully observed",
            incomplete.len(),
            first + 1
        )));
    }

    let roles = Roles { target: 0, partner: 1, adjusters: (2..names.len()).collect() };
    Dataset::new(names.iter().map(|s| s.to_string()).collect(), columns, roles).map_err(Failure::from_config)
}
