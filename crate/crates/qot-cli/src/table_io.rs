//! Two-column delimited spectral-table files: whitespace- or comma-separated,
//! comments with '#', one header line permitted.

use std::fmt;
use std::path::Path;

use qot_core::spectral::{AxisUnit, Extrapolation, SpectralTable};

#[derive(Debug)]
pub struct TableFileError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for TableFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path, self.line, self.message)
    }
}

impl std::error::Error for TableFileError {}

pub fn read_table(
    path: &Path,
    axis: AxisUnit,
    extrapolation: Extrapolation,
) -> Result<SpectralTable, TableFileError> {
    let display = path.display().to_string();
    let err = |line: usize, message: String| TableFileError {
        path: display.clone(),
        line,
        message,
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(0, format!("cannot read table file: {e}")))?;

    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut header_allowance = 1;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Option<(f64, f64)> = match fields.as_slice() {
            [a, b] => match (a.parse(), b.parse()) {
                (Ok(x), Ok(y)) => Some((x, y)),
                _ => None,
            },
            _ => None,
        };
        match parsed {
            Some(p) => pairs.push(p),
            None => {
                if header_allowance > 0 && pairs.is_empty() {
                    header_allowance -= 1;
                } else {
                    return Err(err(
                        line_no,
                        format!("expected two numeric columns, got '{line}'"),
                    ));
                }
            }
        }
    }

    SpectralTable::from_pairs(axis, &pairs, extrapolation)
        .map_err(|e| err(0, format!("invalid table: {e}")))
}
