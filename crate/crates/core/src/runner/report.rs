use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The check could not be evaluated.
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
        }
    }
}

/// A table cell: number or text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    /// Non-finite numbers become text so that JSON round trips.
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(x)
        } else {
            Cell::Text(format!("{x}"))
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r.iter().map(Cell::render))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub kind: String,
    pub module: String,
    pub status: Status,
    /// Tolerance minus the worst deviation; negative on failure.
    pub worst_slack: Option<f64>,
    pub message: Option<String>,
    pub values: serde_json::Value,
    pub table: Option<Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub scenario_version: u32,
    pub seed: u64,
    pub tol_scale: f64,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One line per check with its status and slack.
    pub fn summary(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "numinv {} | seed {} | tol scale {}",
            self.tool_version, self.seed, self.tol_scale
        );
        for c in &self.checks {
            let slack = c
                .worst_slack
                .map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"));
            let _ = write!(
                s,
                "{:<5} {:<width$}  {:<9} slack {}",
                c.status.as_str(),
                c.name,
                c.module,
                slack
            );
            if let Some(m) = &c.message {
                let _ = write!(s, "  ({m})");
            }
            s.push('\n');
        }
        let passed = self
            .checks
            .iter()
            .filter(|c| c.status == Status::Pass)
            .count();
        let _ = writeln!(
            s,
            "{passed}/{} checks passed: {}",
            self.checks.len(),
            if self.passed { "OK" } else { "FAILED" }
        );
        s
    }

    /// Writes `report.json`, `summary.txt` and one CSV per tabulated check
    /// under `tables/`.
    pub fn emit(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("report.json"), self.to_json()?)?;
        std::fs::write(out_dir.join("summary.txt"), self.summary())?;
        let tables: Vec<&CheckRecord> = self.checks.iter().filter(|c| c.table.is_some()).collect();
        if !tables.is_empty() {
            let dir = out_dir.join("tables");
            std::fs::create_dir_all(&dir)?;
            for c in tables {
                let file = std::fs::File::create(dir.join(format!("{}.csv", file_stem(&c.name))))?;
                c.table.as_ref().unwrap().write_csv(file)?;
            }
        }
        Ok(())
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns() {
        let mut t = Table::new(&["gamma", "empirical", "target", "se"]);
        t.push(vec![2.0.into(), 0.5.into(), 0.5.into(), 0.001.into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "gamma,empirical,target,se");
        assert_eq!(text.lines().nth(1).unwrap(), "2,0.5,0.5,0.001");
    }

    #[test]
    fn stems_are_safe() {
        assert_eq!(file_stem("doob#3"), "doob_3");
    }
}
