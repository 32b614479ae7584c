//! Helpers shared by the CLI test targets: running the binary and checking
//! outputs against the shipped schemas.
#![allow(dead_code)]

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use windcond_cli::SCHEMAS;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_windcond"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("WINDCOND_OUT_DIR").output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

pub fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

fn schema_for(file: &str) -> Option<&'static str> {
    let key = if file.starts_with("manifest-") { "manifest" } else { file };
    SCHEMAS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s)
}

fn table_layouts(file: &str) -> Option<Vec<Value>> {
    let tables: Value = serde_json::from_str(SCHEMAS.iter().find(|(k, _)| *k == "tables").unwrap().1).unwrap();
    let t = &tables["tables"];
    let key = if file.starts_with("quantile_tau") { "quantile_tau*.csv" } else { file };
    let mut entry = t.get(key)?;
    if let Value::String(alias) = entry {
        entry = &t[alias.as_str()];
    }
    entry.as_array().cloned()
}

pub fn validate_json(file: &str, v: &Value) -> Result<(), String> {
    let schema: Value = serde_json::from_str(schema_for(file).ok_or(format!("no schema for {file}"))?).unwrap();
    let validator = jsonschema::validator_for(&schema).map_err(|e| format!("bad schema for {file}: {e}"))?;
    let errors: Vec<String> = validator.iter_errors(v).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(format!("{file}: {}", errors.join("; ")))
    }
}

fn field_ok(ty: &str, nullable: bool, s: &str) -> bool {
    if s.is_empty() {
        return nullable || ty == "string";
    }
    match ty {
        "number" => s.parse::<f64>().is_ok_and(f64::is_finite),
        "integer" => s.parse::<i64>().is_ok(),
        "boolean" => s == "true" || s == "false",
        _ => true,
    }
}

pub fn validate_csv(file: &str, text: &str) -> Result<usize, String> {
    let layouts = table_layouts(file).ok_or(format!("no table layout for {file}"))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let layout = layouts
        .iter()
        .map(|l| l.as_array().unwrap())
        .find(|l| l.iter().map(|c| c["name"].as_str().unwrap()).eq(header.iter().map(String::as_str)))
        .ok_or(format!("{file}: header {header:?} matches no layout"))?;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{file}: {e}"))?;
        for (col, field) in layout.iter().zip(rec.iter()) {
            let ty = col["type"].as_str().unwrap();
            let nullable = col.get("nullable").and_then(Value::as_bool).unwrap_or(false);
            if !field_ok(ty, nullable, field) {
                return Err(format!("{file} row {}: `{field}` is not a valid {ty} for {}", i + 2, col["name"]));
            }
        }
        rows += 1;
    }
    Ok(rows)
}

/// Validates every file in `dir`; returns how many were checked.
pub fn validate_dir(dir: &Path) -> Result<usize, String> {
    let mut n = 0;
    let mut entries: Vec<_> = std::fs::read_dir(dir).map_err(|e| e.to_string())?.map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        let text = std::fs::read_to_string(&p).map_err(|e| e.to_string())?;
        if name.ends_with(".json") {
            let v: Value = serde_json::from_str(&text).map_err(|e| format!("{name}: {e}"))?;
            validate_json(&name, &v)?;
        } else if name.ends_with(".csv") {
            validate_csv(&name, &text)?;
        } else {
            return Err(format!("unexpected output file {name}"));
        }
        n += 1;
    }
    Ok(n)
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
