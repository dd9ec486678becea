//! Run directories, JSON helpers and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::CliError;

/// JSON number, with non-finite values spelled out as strings (`"inf"`, `"-inf"`, `"nan"`).
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn to_pretty(v: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("JSON values always serialize");
    bytes.push(b'\n');
    bytes
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Creates `base/name-timestamp-seed`, adding a numeric suffix rather than
/// reusing an existing directory.
pub fn create_run_dir(base: &Path, name: &str, seed: u64, timestamp: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(base).map_err(|e| CliError::Input(format!("cannot create {}: {e}", base.display())))?;
    let stem = format!("{}-{}-{}", sanitize(name), timestamp, seed);
    for k in 0.. {
        let dir = if k == 0 {
            base.join(&stem)
        } else {
            base.join(format!("{stem}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::Input(format!("cannot create {}: {e}", dir.display()))),
        }
    }
    unreachable!()
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Writes through a temporary file and a rename so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, dir.join(name)).map_err(|e| CliError::Input(format!("cannot finalize {name}: {e}")))
}

pub struct ManifestInput<'a> {
    pub scenario: Value,
    pub config_path: &'a Path,
    pub started_at: String,
    pub seed: u64,
    pub backend: &'a str,
    pub jobs: usize,
    pub files: &'a [(String, usize)],
    pub diagnostics: Value,
}

pub fn manifest(m: ManifestInput<'_>) -> Value {
    let mut files: Vec<Value> = m
        .files
        .iter()
        .map(|(name, bytes)| json!({ "name": name, "bytes": bytes }))
        .collect();
    files.push(json!({ "name": "manifest.json", "bytes": Value::Null }));
    let mut out = Map::new();
    out.insert("tool".into(), json!("flatlab"));
    out.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    out.insert("scenario".into(), m.scenario);
    out.insert("config_path".into(), json!(m.config_path.display().to_string()));
    out.insert("started_at".into(), json!(m.started_at));
    out.insert("finished_at".into(), json!(chrono::Utc::now().to_rfc3339()));
    out.insert("seed".into(), json!(m.seed));
    out.insert("backend".into(), json!(m.backend));
    out.insert("jobs".into(), json!(m.jobs));
    out.insert("files".into(), Value::Array(files));
    out.insert("diagnostics".into(), m.diagnostics);
    Value::Object(out)
}
