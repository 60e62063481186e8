// Copyright 2026 The dicke-metrology Developers
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except
// in compliance with the License. You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under
// the License.

//! Deterministic CSV and JSON writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::RunError;

/// Named numeric table with a fixed column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width differs from header"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Tables plus scalar results such as fitted slopes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Vec<(String, f64)>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// Rounds to 12 significant digits and prints the shortest representation that reads back
/// to the rounded value.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded = round_12(v);
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

fn round_12(v: f64) -> f64 {
    format!("{v:.11e}").parse().expect("formatted float parses")
}

fn metadata_lines(cfg: &RunConfig, report: &Report) -> Vec<String> {
    let mut lines = vec![
        format!("# dicke-metrology {}", env!("CARGO_PKG_VERSION")),
        format!("# scenario: {}", cfg.scenario.name()),
        format!(
            "# config: {}",
            serde_json::to_string(&config_json(cfg)).expect("config serializes")
        ),
    ];
    for (k, v) in &report.summary {
        lines.push(format!("# {k}: {}", format_float(*v)));
    }
    lines
}

fn config_json(cfg: &RunConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        // Worker count and destination do not affect the numbers.
        obj.remove("workers");
        obj.remove("out");
    }
    v
}

pub fn render_csv(cfg: &RunConfig, report: &Report, table: &Table) -> String {
    let mut out = String::new();
    for line in metadata_lines(cfg, report) {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&format!("# table: {}\n", table.name));
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn json_number(v: f64) -> Value {
    if v.is_finite() {
        json!(round_12(v))
    } else {
        Value::String(format_float(v))
    }
}

pub fn render_json(cfg: &RunConfig, report: &Report) -> String {
    let tables: Vec<Value> = report
        .tables
        .iter()
        .map(|t| {
            json!({
                "name": t.name,
                "columns": t.columns,
                "rows": t.rows.iter().map(|r| r.iter().map(|&v| json_number(v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut summary = Map::new();
    for (k, v) in &report.summary {
        summary.insert(k.clone(), json_number(*v));
    }
    let doc = json!({
        "tool": format!("dicke-metrology {}", env!("CARGO_PKG_VERSION")),
        "scenario": cfg.scenario.name(),
        "config": config_json(cfg),
        "summary": Value::Object(summary),
        "tables": tables,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// `out.csv` with tables `a`, `b` becomes `out_a.csv`, `out_b.csv`; a single table keeps the
/// given path.
pub fn table_path(out: &Path, table: &str, n_tables: usize) -> PathBuf {
    if n_tables == 1 {
        return out.to_path_buf();
    }
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_{table}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{table}"),
    };
    out.with_file_name(name)
}

/// Writes the report to `cfg.out` or stdout.
pub fn write_report(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>, RunError> {
    match (&cfg.out, cfg.format) {
        (None, Format::Json) => {
            std::io::stdout().write_all(render_json(cfg, report).as_bytes())?;
            Ok(Vec::new())
        }
        (None, Format::Csv) => {
            let mut stdout = std::io::stdout().lock();
            for (i, t) in report.tables.iter().enumerate() {
                if i > 0 {
                    stdout.write_all(b"\n")?;
                }
                stdout.write_all(render_csv(cfg, report, t).as_bytes())?;
            }
            Ok(Vec::new())
        }
        (Some(path), Format::Json) => {
            std::fs::write(path, render_json(cfg, report))?;
            Ok(vec![path.clone()])
        }
        (Some(path), Format::Csv) => {
            let mut written = Vec::new();
            for t in &report.tables {
                let p = table_path(path, &t.name, report.tables.len());
                std::fs::write(&p, render_csv(cfg, report, t))?;
                written.push(p);
            }
            Ok(written)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_float(64.0), "64");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(2112.0000000000005), "2112");
        assert_eq!(format_float(1.0e-20), "0.00000000000000000001");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(-0.0), "0");
    }

    #[test]
    fn multi_table_paths() {
        let p = Path::new("/tmp/run.csv");
        assert_eq!(table_path(p, "qfi", 2), PathBuf::from("/tmp/run_qfi.csv"));
        assert_eq!(table_path(p, "qfi", 1), PathBuf::from("/tmp/run.csv"));
    }
}
