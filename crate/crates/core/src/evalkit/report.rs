//! Experiment reports as JSON, markdown and CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub condition: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// Per-set or per-run values behind the summary.
    pub values: Vec<f64>,
}

impl ReportRow {
    pub fn from_values(condition: &str, metric: &str, values: Vec<f64>) -> ReportRow {
        let (mean, std) = mean_std(&values);
        ReportRow { condition: condition.into(), metric: metric.into(), mean, std, values }
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
    /// Whatever settings are needed to rerun the experiment.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
}

impl ExperimentReport {
    pub fn row(&self, condition: &str, metric: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.condition == condition && r.metric == metric)
    }

    fn conditions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.condition.as_str()) {
                out.push(&r.condition);
            }
        }
        out
    }

    fn metrics(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric.as_str()) {
                out.push(&r.metric);
            }
        }
        out
    }

    /// One line per condition, one column per metric; `mean±std` when a
    /// metric has more than one value.
    pub fn to_markdown(&self) -> String {
        let metrics = self.metrics();
        let mut out = format!("| Condition | {} |\n|---|{}\n", metrics.join(" | "), "---|".repeat(metrics.len()));
        for c in self.conditions() {
            out.push_str("| ");
            out.push_str(c);
            out.push_str(" |");
            for m in &metrics {
                match self.row(c, m) {
                    Some(r) if r.values.len() > 1 => write!(out, " {:.2}±{:.2} |", r.mean, r.std).unwrap(),
                    Some(r) => write!(out, " {:.4} |", r.mean).unwrap(),
                    None => out.push_str(" |"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,metric,index,value\n");
        for r in &self.rows {
            for (i, v) in r.values.iter().enumerate() {
                writeln!(out, "{},{},{i},{v}", csv_field(&r.condition), csv_field(&r.metric)).unwrap();
            }
        }
        out
    }

    /// Writes `<stem>.json`, `<stem>.md` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(), EvalError> {
        fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        for (ext, body) in [("json", json), ("md", self.to_markdown()), ("csv", self.to_csv())] {
            let path = dir.join(format!("{stem}.{ext}"));
            fs::write(&path, body).map_err(|e| EvalError::io(&path, e))?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
