//! Field-by-field comparison of two run directories.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

/// One numeric field that differs beyond tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Diff {
    pub path: String,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Default)]
pub struct Comparison {
    pub diffs: Vec<Diff>,
    pub schema: Vec<String>,
    pub checked: usize,
}

fn load(dir: &Path, name: &str) -> Result<Value, CliError> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Numbers, plus the string spellings used for non-finite values.
fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn walk(path: &str, a: &Value, b: &Value, tol: f64, out: &mut Comparison) {
    if let (Some(x), Some(y)) = (as_number(a), as_number(b)) {
        out.checked += 1;
        if !close(x, y, tol) {
            out.diffs.push(Diff { path: path.to_string(), a: x, b: y });
        }
        return;
    }
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            for k in ma.keys().filter(|k| !mb.contains_key(*k)) {
                out.schema.push(format!("{path}.{k}: only in first"));
            }
            for k in mb.keys().filter(|k| !ma.contains_key(*k)) {
                out.schema.push(format!("{path}.{k}: only in second"));
            }
            for (k, va) in ma {
                if let Some(vb) = mb.get(k) {
                    walk(&format!("{path}.{k}"), va, vb, tol, out);
                }
            }
        }
        (Value::Array(xa), Value::Array(xb)) => {
            if xa.len() != xb.len() {
                out.schema.push(format!("{path}: length {} vs {}", xa.len(), xb.len()));
                return;
            }
            for (i, (va, vb)) in xa.iter().zip(xb).enumerate() {
                walk(&format!("{path}[{i}]"), va, vb, tol, out);
            }
        }
        (Value::String(_), Value::String(_)) | (Value::Bool(_), Value::Bool(_)) | (Value::Null, Value::Null) => {
            // labels and flags are informational only
        }
        _ => out.schema.push(format!("{path}: type mismatch")),
    }
}

/// Exit status: 0 when every numeric field agrees, 1 otherwise.
/// A missing file or a structural mismatch is an input error.
pub fn compare(dir_a: &Path, dir_b: &Path, tol: f64) -> Result<u8, CliError> {
    if !(tol >= 0.0) {
        return Err(CliError::Input(format!("tolerance must be nonnegative, got {tol}")));
    }
    let mut out = Comparison::default();
    for name in ["report.json", "manifest.json"] {
        let (a, b) = (load(dir_a, name)?, load(dir_b, name)?);
        // the manifest carries timing and paths; only its diagnostics are numeric content
        let (a, b) = if name == "manifest.json" {
            (a.get("diagnostics").cloned().unwrap_or(Value::Null), b.get("diagnostics").cloned().unwrap_or(Value::Null))
        } else {
            (a.get("result").cloned().unwrap_or(Value::Null), b.get("result").cloned().unwrap_or(Value::Null))
        };
        walk(name, &a, &b, tol, &mut out);
    }
    if !out.schema.is_empty() {
        return Err(CliError::Input(format!("schema mismatch:\n  {}", out.schema.join("\n  "))));
    }
    for d in &out.diffs {
        println!("{}: {} vs {} (diff {:.3e})", d.path, d.a, d.b, (d.a - d.b).abs());
    }
    println!("{} numeric fields compared, {} outside tolerance {tol}", out.checked, out.diffs.len());
    Ok(u8::from(!out.diffs.is_empty()))
}
