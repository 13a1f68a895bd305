use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperienceError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject: String,
    pub accuracy: f64,
    pub f1: f64,
}

/// Per-subject scores and their unweighted means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<SubjectScore>,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<SubjectScore>) -> Self {
        let n = rows.len().max(1) as f64;
        let mean_accuracy = rows.iter().map(|r| r.accuracy).sum::<f64>() / n;
        let mean_f1 = rows.iter().map(|r| r.f1).sum::<f64>() / n;
        Self {
            rows,
            mean_accuracy,
            mean_f1,
        }
    }

    /// Parse a tab- or space-separated `subject acc f1` table. A header line
    /// and `#` comments are skipped; an `Average` row, if present, is ignored
    /// so that means are always recomputed.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(ExperienceError::BadTable(format!("line {}: expected 3 columns", n + 1)));
            }
            if cols[0].eq_ignore_ascii_case("subject") || cols[0].eq_ignore_ascii_case("average") {
                continue;
            }
            let num = |s: &str| -> Result<f64> {
                let v: f64 = s
                    .parse()
                    .map_err(|_| ExperienceError::BadTable(format!("line {}: bad number {s:?}", n + 1)))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(ExperienceError::BadTable(format!("line {}: {v} outside [0, 1]", n + 1)));
                }
                Ok(v)
            };
            rows.push(SubjectScore {
                subject: cols[0].to_string(),
                accuracy: num(cols[1])?,
                f1: num(cols[2])?,
            });
        }
        if rows.is_empty() {
            return Err(ExperienceError::BadTable("no rows".into()));
        }
        Ok(Self::from_rows(rows))
    }

    pub fn load_table(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_table(&std::fs::read_to_string(path)?)
    }

    /// Fixed-width text table with an `Average` row, three decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::from("Subject\tACC\tF1\n");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{:.3}\t{:.3}", r.subject, r.accuracy, r.f1);
        }
        let _ = writeln!(out, "Average\t{:.3}\t{:.3}", self.mean_accuracy, self.mean_f1);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
