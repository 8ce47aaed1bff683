//! Published JSON schemas for configs, manifests and every report type.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde_json::Value;

use crate::config::Command;
use crate::CliError;

pub const CONFIG: &str = "config";
pub const MANIFEST: &str = "manifest";

const SCHEMAS: [(&str, &str); 10] = [
    (CONFIG, include_str!("../schemas/config.schema.json")),
    (MANIFEST, include_str!("../schemas/manifest.schema.json")),
    ("simulate", include_str!("../schemas/simulate.schema.json")),
    ("fit", include_str!("../schemas/fit.schema.json")),
    ("ident-scan", include_str!("../schemas/ident-scan.schema.json")),
    ("partial-ident", include_str!("../schemas/partial-ident.schema.json")),
    ("lemma-check", include_str!("../schemas/lemma-check.schema.json")),
    ("laplace-check", include_str!("../schemas/laplace-check.schema.json")),
    ("stationarity", include_str!("../schemas/stationarity.schema.json")),
    ("agarch-demo", include_str!("../schemas/agarch-demo.schema.json")),
];

/// Schema names: `config`, `manifest` and one per command report.
pub fn names() -> impl Iterator<Item = &'static str> {
    SCHEMAS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    SCHEMAS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn report_schema(command: Command) -> &'static str {
    text(command.name()).expect("every command has a report schema")
}

fn validators() -> &'static HashMap<&'static str, jsonschema::Validator> {
    static V: OnceLock<HashMap<&'static str, jsonschema::Validator>> = OnceLock::new();
    V.get_or_init(|| {
        SCHEMAS
            .iter()
            .map(|(name, text)| {
                let schema: Value = serde_json::from_str(text).expect("embedded schema is JSON");
                let v = jsonschema::validator_for(&schema).expect("embedded schema compiles");
                (*name, v)
            })
            .collect()
    })
}

/// Up to `limit` validation errors of `instance` against schema `name`, as `path: message`.
pub fn errors(name: &str, instance: &Value, limit: usize) -> Result<Vec<String>, CliError> {
    let v = validators()
        .get(name)
        .ok_or_else(|| CliError::Validation(format!("no schema named {name:?}")))?;
    Ok(v.iter_errors(instance)
        .take(limit)
        .map(|e| {
            let path = e.instance_path.to_string();
            format!("{}: {e}", if path.is_empty() { "/" } else { &path })
        })
        .collect())
}

pub fn validate_config(raw: &Value) -> Result<(), CliError> {
    let errs = errors(CONFIG, raw, 10)?;
    if errs.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("config does not match its schema: {}", errs.join("; "))))
    }
}
