//! Serializable result records and plain-text table writers shared with the
//! CLI. Floats are written with Rust's shortest-roundtrip formatting, so
//! identical inputs produce byte-identical files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::quark::QuarkState;
use crate::spectral::SpectralResult;

pub const SCHEMA_VERSION: u32 = 1;

/// One CSV table in memory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// State export: p, A, B, M, Z columns.
pub fn state_table(name: &str, state: &QuarkState) -> Table {
    let mut t = Table::new(name, &["p", "A", "B", "M", "Z"]);
    for ((&p, &a), &b) in state
        .grid()
        .nodes()
        .iter()
        .zip(state.a_values())
        .zip(state.b_values())
    {
        t.push(vec![p, a, b, b / a, 1.0 / a]);
    }
    t
}

/// Spectral export: the eigenvector against the grid.
pub fn eigenvector_table(name: &str, nodes: &[f64], r: &SpectralResult) -> Table {
    let mut t = Table::new(name, &["p", "t"]);
    for (&p, &v) in nodes.iter().zip(&r.eigenvector) {
        t.push(vec![p, v]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_deterministic_and_parseable() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1.0, 0.1 + 0.2]);
        t.push(vec![-3.5e-9, 7.0]);
        let s1 = t.to_csv();
        let s2 = t.to_csv();
        assert_eq!(s1, s2);
        let mut lines = s1.lines();
        assert_eq!(lines.next().unwrap(), "a,b");
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(first[1], 0.1 + 0.2);
    }
}
