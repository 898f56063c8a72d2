//! Run reports: tables, assertions recomputable from those tables, stage
//! outcomes, and their on-disk layout.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use poincare_lab::spectral::linear_fit;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }
}

/// Non-finite numbers become text, since JSON has no literal for them.
impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(x)
        } else {
            Cell::Text(x.to_string())
        }
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Num(if x { 1.0 } else { 0.0 })
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    /// Numeric values of a column; `None` if it is missing or holds text.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[j].as_f64()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format!("{x:?}"),
                    Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// How an assertion's value is computed from one table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reduce {
    Min,
    Max,
    /// Largest over smallest entry.
    MaxOverMin,
    /// Least-squares slope of the column against another column.
    Slope { against: String },
}

impl Reduce {
    fn apply(&self, table: &Table, column: &str) -> Option<f64> {
        let v = table.column(column)?;
        if v.is_empty() {
            return None;
        }
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(match self {
            Reduce::Min => min,
            Reduce::Max => max,
            Reduce::MaxOverMin => max / min,
            Reduce::Slope { against } => {
                let x = table.column(against)?;
                if x.len() < 2 {
                    return None;
                }
                linear_fit(&x, &v).0
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub table: String,
    pub column: String,
    pub reduce: Reduce,
    /// `None` when the column is missing or empty.
    pub value: Option<f64>,
    pub lo: f64,
    pub hi: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub ok: bool,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub inputs_hash: String,
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
    pub stages: Vec<Stage>,
    /// Nested results written as `<name>.json`.
    pub documents: BTreeMap<String, serde_json::Value>,
    pub wall_time: f64,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.run_id(),
            inputs_hash: config.hash(),
            config: config.clone(),
            tables: Vec::new(),
            assertions: Vec::new(),
            stages: Vec::new(),
            documents: BTreeMap::new(),
            wall_time: 0.0,
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Adds an assertion `lo <= reduce(table.column) <= hi`. A value that
    /// cannot be computed fails. Infinite bounds are stored as the largest
    /// finite `f64`.
    pub fn assert_range(&mut self, name: &str, table: &str, column: &str, reduce: Reduce, lo: f64, hi: f64) {
        let (lo, hi) = (lo.max(f64::MIN), hi.min(f64::MAX));
        let value = self.table(table).and_then(|t| reduce.apply(t, column));
        self.assertions.push(Assertion {
            name: name.into(),
            table: table.into(),
            column: column.into(),
            reduce,
            value,
            lo,
            hi,
            passed: value.is_some_and(|v| lo <= v && v <= hi),
        });
    }

    /// Assertions whose stored value or verdict disagrees with the tables.
    pub fn recheck(&self) -> Vec<String> {
        self.assertions
            .iter()
            .filter_map(|a| {
                let v = self.table(&a.table).and_then(|t| a.reduce.apply(t, &a.column));
                let passed = v.is_some_and(|v| a.lo <= v && v <= a.hi);
                let same = v.map(f64::to_bits) == a.value.map(f64::to_bits);
                (!same || passed != a.passed).then(|| a.name.clone())
            })
            .collect()
    }

    /// All assertions passed and every stage ran.
    pub fn success(&self) -> bool {
        self.assertions.iter().all(|a| a.passed) && self.stages.iter().all(|s| s.ok)
    }

    pub fn summary(&self) -> String {
        let bound = |x: f64| match x {
            f64::MAX => "inf".to_string(),
            f64::MIN => "-inf".to_string(),
            f64::MIN_POSITIVE => "0+".to_string(),
            _ => format!("{x:?}"),
        };
        let mut s = format!("{} ({:.1}s)\n", self.experiment, self.wall_time);
        for st in self.stages.iter().filter(|s| !s.ok) {
            s.push_str(&format!("  stage {} failed: {}\n", st.name, st.error.as_deref().unwrap_or("")));
        }
        for a in &self.assertions {
            s.push_str(&format!(
                "  {} {}: {} in [{}, {}]\n",
                if a.passed { "PASS" } else { "FAIL" },
                a.name,
                a.value.map_or("unavailable".into(), |v| format!("{v:?}")),
                bound(a.lo),
                bound(a.hi)
            ));
        }
        s
    }

    /// Writes `config.json`, `report.json` and one CSV per table under
    /// `<out>/<experiment id>/`.
    pub fn write(&self) -> io::Result<PathBuf> {
        let dir = self.config.out.join(&self.experiment);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)?)?;
        fs::write(dir.join("config.toml"), self.config.to_text())?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        for t in &self.tables {
            fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        for (name, doc) in &self.documents {
            fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(doc)?)?;
        }
        Ok(dir)
    }

    pub fn load(dir: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(dir.join("report.json"))?;
        Ok(serde_json::from_str(&text)?)
    }
}
