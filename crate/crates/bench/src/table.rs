use std::fmt::Write as _;
use std::path::Path;

use crate::{BenchError, Result};

/// One table cell. Floats are written in shortest round-trip exponent form,
/// so identical values always produce identical bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
}

impl Cell {
    pub fn as_f64(self) -> f64 {
        match self {
            Cell::Int(i) => i as f64,
            Cell::Float(x) => x,
        }
    }
}

/// Mean and standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregated errors at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub x: Cell,
    pub error_on_cost: f64,
    pub std_on_cost: f64,
    pub error_on_potentials: f64,
    pub std_on_potentials: f64,
    /// Values of the table's extra columns.
    pub extra: Vec<f64>,
}

impl ResultRow {
    pub fn from_trials(x: Cell, cost_errors: &[f64], potential_errors: &[f64]) -> Self {
        let (error_on_cost, std_on_cost) = mean_std(cost_errors);
        let (error_on_potentials, std_on_potentials) = mean_std(potential_errors);
        Self {
            x,
            error_on_cost,
            std_on_cost,
            error_on_potentials,
            std_on_potentials,
            extra: Vec::new(),
        }
    }

    fn cells(&self) -> Vec<Cell> {
        let mut v = vec![
            self.x,
            Cell::Float(self.error_on_cost),
            Cell::Float(self.std_on_cost),
            Cell::Float(self.error_on_potentials),
            Cell::Float(self.std_on_potentials),
        ];
        v.extend(self.extra.iter().map(|&e| Cell::Float(e)));
        v
    }
}

/// Column layout of the error tables.
pub const ERROR_COLUMNS: [&str; 4] = ["error_on_cost", "std_on_cost", "error_on_potentials", "std_on_potentials"];

/// A space-separated table with `#` comment lines above the header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Error table with first column `x_column` followed by the four error
    /// columns and `extra` columns.
    pub fn errors(x_column: &str, extra: &[&str], rows: &[ResultRow]) -> Self {
        let mut header = vec![x_column.to_string()];
        header.extend(ERROR_COLUMNS.iter().map(|s| s.to_string()));
        header.extend(extra.iter().map(|s| s.to_string()));
        Self {
            comments: Vec::new(),
            header,
            rows: rows.iter().map(ResultRow::cells).collect(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.join(" "));
        for row in &self.rows {
            let line: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Float(x) => format!("{x:e}"),
                })
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|source| BenchError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(path, self.render()).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads back a rendered table. Every value becomes a float cell.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut table = Table::default();
        for (k, line) in text.lines().enumerate() {
            if let Some(c) = line.strip_prefix('#') {
                table.comments.push(c.trim_start().to_string());
            } else if line.trim().is_empty() {
                continue;
            } else if table.header.is_empty() {
                table.header = line.split_whitespace().map(String::from).collect();
            } else {
                let row = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map(Cell::Float).map_err(|_| format!("line {}: bad value `{t}`", k + 1)))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if row.len() != table.header.len() {
                    return Err(format!("line {}: {} values for {} columns", k + 1, row.len(), table.header.len()));
                }
                table.rows.push(row);
            }
        }
        Ok(table)
    }
}
