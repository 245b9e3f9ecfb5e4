//! CSV ingestion of sample laws.
//!
//! One column: realizations with equal weights. Two columns: `value,probability`,
//! probabilities validated to sum to 1 within [`CSV_MASS_TOL`] and then
//! renormalized. A header row is optional and detected by a non-numeric first
//! field.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::prob::{compensated_sum, RandomVariable};

pub const CSV_MASS_TOL: f64 = 1e-9;

/// Which columns carry the value and (optionally) the probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Column {
    fn parse(s: &str) -> Column {
        match s.trim().parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub value: Column,
    pub prob: Option<Column>,
}

impl std::str::FromStr for ColumnSpec {
    type Err = Error;

    /// `value` or `value,prob`; each part a 0-based index or a header name.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(',');
        let value = parts
            .next()
            .filter(|p| !p.trim().is_empty())
            .map(Column::parse)
            .ok_or_else(|| Error::Parse(format!("empty column spec {s:?}")))?;
        let prob = parts.next().map(Column::parse);
        if parts.next().is_some() {
            return Err(Error::Parse(format!("too many columns in spec {s:?}")));
        }
        Ok(ColumnSpec { value, prob })
    }
}

pub fn load_sample(path: &Path, spec: Option<&ColumnSpec>) -> Result<RandomVariable> {
    let file = std::fs::File::open(path)?;
    read_sample(file, spec)
}

pub fn read_sample<R: Read>(reader: R, spec: Option<&ColumnSpec>) -> Result<RandomVariable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::Parse("sample file has no rows".into()));
    }
    let header = match rows[0].first() {
        Some(f) if f.parse::<f64>().is_err() => Some(rows.remove(0)),
        _ => None,
    };
    let resolve = |col: &Column| -> Result<usize> {
        match col {
            Column::Index(i) => Ok(*i),
            Column::Name(name) => header
                .as_ref()
                .and_then(|h| h.iter().position(|f| f == name))
                .ok_or_else(|| Error::Parse(format!("no column named {name:?}"))),
        }
    };
    let width = rows.iter().map(Vec::len).min().unwrap_or(0);
    let (value_col, prob_col) = match spec {
        Some(s) => (
            resolve(&s.value)?,
            s.prob.as_ref().map(resolve).transpose()?,
        ),
        None => (0, (width >= 2).then_some(1)),
    };

    let field = |row: &[String], line: usize, col: usize| -> Result<f64> {
        let raw = row
            .get(col)
            .ok_or_else(|| Error::Parse(format!("row {line}: missing column {col}")))?;
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::Parse(format!("row {line}: {raw:?} is not a number")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("row {line}: value is not finite")));
        }
        Ok(v)
    };

    let mut values = Vec::with_capacity(rows.len());
    let mut probs = Vec::with_capacity(rows.len());
    for (line, row) in rows.iter().enumerate() {
        values.push(field(row, line + 1, value_col)?);
        if let Some(pc) = prob_col {
            probs.push(field(row, line + 1, pc)?);
        }
    }
    if prob_col.is_none() {
        probs = vec![1.0 / values.len() as f64; values.len()];
    } else {
        let mass = compensated_sum(probs.iter().copied());
        if (mass - 1.0).abs() > CSV_MASS_TOL {
            return Err(Error::validation(
                "sample",
                format!("probabilities sum to {mass}, not 1"),
            ));
        }
        for p in &mut probs {
            *p /= mass;
        }
    }
    RandomVariable::from_pairs(&values, &probs)
}
