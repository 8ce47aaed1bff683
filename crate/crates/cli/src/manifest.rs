//! Run manifests and replay.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Command;
use crate::{CliError, TOOL, VERSION};

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPLAY_DIR: &str = "replay-tmp";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    pub fn new(path: &str, bytes: &[u8]) -> Self {
        Self {
            path: path.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// The config document exactly as run.
    pub config: Value,
    /// Directory that relative paths in `config` resolve against.
    pub config_dir: PathBuf,
    /// SHA-256 of `config` serialized compactly with sorted keys.
    pub config_sha256: String,
    pub files: Vec<FileEntry>,
    pub wall_time_seconds: f64,
    pub threads: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Compact serialization; `serde_json::Map` keeps keys sorted, so this is canonical.
pub fn canonical_hash(v: &Value) -> String {
    sha256_hex(v.to_string().as_bytes())
}

impl Manifest {
    pub fn new(command: Command, config: Value, config_dir: &Path, files: Vec<FileEntry>, wall: f64, threads: usize) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command,
            config_sha256: canonical_hash(&config),
            config,
            config_dir: config_dir.to_path_buf(),
            files,
            wall_time_seconds: wall,
            threads,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut b = serde_json::to_vec_pretty(self)
            .map_err(|e| CliError::Numerical(format!("cannot serialize manifest: {e}")))?;
        b.push(b'\n');
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io("cannot read manifest", path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("manifest {}: {e}", path.display())))
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io("cannot write", path, e))
}

/// Field paths where two JSON documents differ, at most `limit` of them.
pub fn json_diff(a: &Value, b: &Value, limit: usize) -> Vec<String> {
    let mut out = Vec::new();
    diff_into("$", a, b, &mut out, limit);
    out
}

fn diff_into(path: &str, a: &Value, b: &Value, out: &mut Vec<String>, limit: usize) {
    if out.len() >= limit {
        return;
    }
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, va) in x {
                let p = format!("{path}.{k}");
                match y.get(k) {
                    Some(vb) => diff_into(&p, va, vb, out, limit),
                    None => out.push(format!("{p}: only in the recorded report")),
                }
                if out.len() >= limit {
                    return;
                }
            }
            for k in y.keys().filter(|k| !x.contains_key(*k)) {
                if out.len() >= limit {
                    return;
                }
                out.push(format!("{path}.{k}: only in the replayed report"));
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                out.push(format!("{path}: length {} != {}", x.len(), y.len()));
            }
            for (i, (va, vb)) in x.iter().zip(y).enumerate() {
                diff_into(&format!("{path}[{i}]"), va, vb, out, limit);
                if out.len() >= limit {
                    return;
                }
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: {a} != {b}")),
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub command: Command,
    pub identical: bool,
    pub differences: Vec<String>,
    pub warnings: Vec<String>,
}

/// Re-executes the manifest's config in `<manifest dir>/replay-tmp` and
/// byte-compares every recorded file. The temporary directory is removed.
pub fn replay(manifest_path: &Path, threads: Option<usize>) -> Result<ReplayOutcome, CliError> {
    let m = Manifest::load(manifest_path)?;
    let dir = manifest_path
        .parent()
        .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
        .unwrap_or(Path::new("."));
    let mut warnings = Vec::new();
    if canonical_hash(&m.config) != m.config_sha256 {
        warnings.push("config_sha256 does not match the embedded config".to_string());
    }
    if m.version != VERSION {
        warnings.push(format!("recorded with version {}, replaying with {VERSION}", m.version));
    }
    let mut recorded = Vec::with_capacity(m.files.len());
    for f in &m.files {
        if Path::new(&f.path).components().count() != 1 {
            return Err(CliError::Validation(format!("manifest lists a nested path {:?}", f.path)));
        }
        let p = dir.join(&f.path);
        let bytes = std::fs::read(&p).map_err(|e| CliError::io("missing output file", &p, e))?;
        recorded.push((f.path.clone(), bytes));
    }
    if !m.files.iter().any(|f| f.path == REPORT_FILE) {
        return Err(CliError::Validation(format!("manifest does not list {REPORT_FILE}")));
    }

    let tmp = dir.join(REPLAY_DIR);
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| CliError::io("cannot clear", &tmp, e))?;
    }
    let result = replay_into(&m, &tmp, &recorded, threads);
    let _ = std::fs::remove_dir_all(&tmp);
    let differences = result?;
    Ok(ReplayOutcome {
        command: m.command,
        identical: differences.is_empty(),
        differences,
        warnings,
    })
}

fn replay_into(
    m: &Manifest,
    tmp: &Path,
    recorded: &[(String, Vec<u8>)],
    threads: Option<usize>,
) -> Result<Vec<String>, CliError> {
    crate::run_value(m.command, m.config.clone(), &m.config_dir, tmp, threads)?;
    let mut diffs = Vec::new();
    for (name, old) in recorded {
        let p = tmp.join(name);
        let new = std::fs::read(&p).map_err(|e| CliError::io("replay did not produce", &p, e))?;
        if &new == old {
            continue;
        }
        if name.ends_with(".json") {
            match (serde_json::from_slice::<Value>(old), serde_json::from_slice::<Value>(&new)) {
                (Ok(a), Ok(b)) => {
                    let d = json_diff(&a, &b, 20);
                    if d.is_empty() {
                        diffs.push(format!("{name}: formatting differs"));
                    }
                    diffs.extend(d.into_iter().map(|x| format!("{name}: {x}")));
                }
                _ => diffs.push(format!("{name}: contents differ")),
            }
        } else {
            diffs.push(format!("{name}: contents differ"));
        }
    }
    Ok(diffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn diff_reports_paths() {
        let a = json!({"a": 1, "b": [1, 2, {"c": "x"}], "only": true});
        let b = json!({"a": 1, "b": [1, 3, {"c": "y"}], "new": 0});
        let d = json_diff(&a, &b, 10);
        assert!(d.iter().any(|s| s.starts_with("$.b[1]")));
        assert!(d.iter().any(|s| s.starts_with("$.b[2].c")));
        assert!(d.iter().any(|s| s.contains("only in the recorded")));
        assert!(d.iter().any(|s| s.contains("only in the replayed")));
        assert!(json_diff(&a, &a, 10).is_empty());
    }

    #[test]
    fn canonical_hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"x":1,"y":{"b":2,"a":3}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"y":{"a":3,"b":2},"x":1}"#).unwrap();
        assert_eq!(canonical_hash(&a), canonical_hash(&b));
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
