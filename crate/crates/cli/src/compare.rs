//! Regression comparison of two report files: per-quantity relative
//! differences against a tolerance, plus provenance (config) diffing.

use std::path::Path;

use anyhow::{anyhow, Context};
use serde_json::Value;

#[derive(Debug, Default)]
pub struct Diff {
    /// (path, a, b, relative difference) beyond tolerance.
    pub violations: Vec<(String, f64, f64, f64)>,
    /// Paths where the configs differ (provenance flags, not violations).
    pub config_flags: Vec<String>,
    pub compared: usize,
}

fn walk_numbers(path: &str, a: &Value, b: &Value, rtol: f64, out: &mut Diff) -> anyhow::Result<()> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            out.compared += 1;
            let scale = x.abs().max(y.abs());
            if scale > 1e-300 {
                let rel = (x - y).abs() / scale;
                if rel > rtol {
                    out.violations.push((path.to_string(), x, y, rel));
                }
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            let keys: std::collections::BTreeSet<_> = x.keys().chain(y.keys()).collect();
            for k in keys {
                match (x.get(k), y.get(k)) {
                    (Some(xa), Some(yb)) => walk_numbers(&format!("{path}.{k}"), xa, yb, rtol, out)?,
                    _ => return Err(anyhow!("schema mismatch at {path}.{k}")),
                }
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Err(anyhow!(
                    "schema mismatch at {path}: array lengths {} vs {}",
                    x.len(),
                    y.len()
                ));
            }
            for (i, (xa, yb)) in x.iter().zip(y).enumerate() {
                walk_numbers(&format!("{path}[{i}]"), xa, yb, rtol, out)?;
            }
        }
        (Value::String(x), Value::String(y)) => {
            if x != y {
                out.violations.push((path.to_string(), f64::NAN, f64::NAN, f64::INFINITY));
            }
        }
        (Value::Bool(x), Value::Bool(y)) => {
            if x != y {
                out.violations.push((path.to_string(), f64::NAN, f64::NAN, f64::INFINITY));
            }
        }
        (Value::Null, Value::Null) => {}
        _ => return Err(anyhow!("schema mismatch at {path}: value kinds differ")),
    }
    Ok(())
}

fn flag_config(path: &str, a: &Value, b: &Value, out: &mut Diff) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let keys: std::collections::BTreeSet<_> = x.keys().chain(y.keys()).collect();
            for k in keys {
                match (x.get(k), y.get(k)) {
                    (Some(xa), Some(yb)) => flag_config(&format!("{path}.{k}"), xa, yb, out),
                    _ => out.config_flags.push(format!("{path}.{k} present on one side only")),
                }
            }
        }
        (x, y) if x != y => out.config_flags.push(format!("{path}: {x} vs {y}")),
        _ => {}
    }
}

pub fn compare_reports(a: &Path, b: &Path, rtol: f64) -> anyhow::Result<Diff> {
    let ra: Value = serde_json::from_str(&std::fs::read_to_string(a).context("reading first report")?)
        .context("parsing first report")?;
    let rb: Value = serde_json::from_str(&std::fs::read_to_string(b).context("reading second report")?)
        .context("parsing second report")?;
    for r in [&ra, &rb] {
        if r.get("schema").and_then(Value::as_u64)
            != Some(gapforge_core::report::SCHEMA_VERSION as u64)
        {
            return Err(anyhow!("schema mismatch: unsupported or missing schema field"));
        }
    }
    let kind_a = ra.get("analysis").and_then(Value::as_str);
    let kind_b = rb.get("analysis").and_then(Value::as_str);
    if kind_a.is_none() || kind_a != kind_b {
        return Err(anyhow!(
            "schema mismatch: analysis kinds {kind_a:?} vs {kind_b:?}"
        ));
    }
    let mut diff = Diff::default();
    flag_config(
        "config",
        ra.get("config").unwrap_or(&Value::Null),
        rb.get("config").unwrap_or(&Value::Null),
        &mut diff,
    );
    walk_numbers(
        "results",
        ra.get("results").ok_or_else(|| anyhow!("schema mismatch: no results"))?,
        rb.get("results").ok_or_else(|| anyhow!("schema mismatch: no results"))?,
        rtol,
        &mut diff,
    )?;
    Ok(diff)
}
