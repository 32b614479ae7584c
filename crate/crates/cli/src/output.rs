//! Output files: number rounding, atomic writes and the run manifest.

use crate::error::CliError;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Rounds to `digits` significant digits through the decimal representation.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().expect("formatted float parses")
}

/// Rounds every non-integer number in a JSON value.
pub fn round_json(v: &mut Value, digits: usize) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64"), digits);
            *v = json!(x);
        }
        Value::Array(a) => a.iter_mut().for_each(|x| round_json(x, digits)),
        Value::Object(m) => m.values_mut().for_each(|x| round_json(x, digits)),
        _ => {}
    }
}

/// One CSV field.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i32> for Cell {
    fn from(x: i32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Str(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Str(x)
    }
}

/// Writes into one output directory and remembers what it wrote.
pub struct OutputDir {
    dir: PathBuf,
    full_precision: bool,
    written: Vec<(String, String, usize)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

impl OutputDir {
    pub fn create(dir: &Path, full_precision: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(OutputDir { dir: dir.to_path_buf(), full_precision, written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn num(&self, x: f64) -> String {
        if x.is_nan() {
            return String::new();
        }
        let x = if self.full_precision { x } else { round_sig(x, SIGNIFICANT_DIGITS) };
        format!("{x}")
    }

    /// Temp file in the target directory, then rename.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        tmp.write_all(bytes).map_err(|e| io_err(&target, e))?;
        // temp files are created owner-only; outputs should be readable like any other file
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file()
                .set_permissions(std::fs::Permissions::from_mode(0o644))
                .map_err(|e| io_err(&target, e))?;
        }
        tmp.persist(&target).map_err(|e| io_err(&target, e.error))?;
        self.written.push((name.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut v = value.clone();
        if !self.full_precision {
            round_json(&mut v, SIGNIFICANT_DIGITS);
        }
        let mut text = serde_json::to_string_pretty(&v).expect("JSON values serialize");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), CliError> {
        let mut w = String::new();
        w.push_str(&header.join(","));
        w.push('\n');
        for row in rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => self.num(*x),
                    Cell::Int(i) => i.to_string(),
                    Cell::Str(s) => quote(s),
                    Cell::Bool(b) => b.to_string(),
                    Cell::Empty => String::new(),
                })
                .collect();
            w.push_str(&fields.join(","));
            w.push('\n');
        }
        self.write_bytes(name, w.as_bytes())
    }

    /// `manifest-<command>.json`: tool version, resolved configuration,
    /// input and output digests. Contains nothing time dependent.
    pub fn finish(mut self, command: &str, config: Value, inputs: &[PathBuf]) -> Result<Vec<String>, CliError> {
        let mut ins = Vec::new();
        for p in inputs {
            let bytes = std::fs::read(p).map_err(|e| io_err(p, e))?;
            ins.push(json!({ "path": p.display().to_string(), "sha256": sha256_hex(&bytes), "bytes": bytes.len() }));
        }
        let mut outs: Vec<_> = self.written.clone();
        outs.sort();
        let outputs: Vec<Value> =
            outs.iter().map(|(f, h, n)| json!({ "file": f, "sha256": h, "bytes": n })).collect();
        let mut m = Map::new();
        m.insert("tool".into(), json!("windcond"));
        m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        m.insert("command".into(), json!(command));
        m.insert("config".into(), config);
        m.insert("inputs".into(), Value::Array(ins));
        m.insert("outputs".into(), Value::Array(outputs));
        let name = format!("manifest-{command}.json");
        let mut text = serde_json::to_string_pretty(&Value::Object(m)).expect("serializes");
        text.push('\n');
        self.write_bytes(&name, text.as_bytes())?;
        Ok(self.written.into_iter().map(|(f, _, _)| f).collect())
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `0.5` -> `tau0.5`, used in file names.
pub fn tau_tag(tau: f64) -> String {
    format!("tau{tau}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(1.234_567_89, 6), 1.23457);
        assert_eq!(round_sig(-0.000_123_456_78, 6), -0.000123457);
        assert_eq!(round_sig(123_456_789.0, 6), 123_457_000.0);
        assert_eq!(round_sig(0.0, 6), 0.0);
        let mut v = json!({ "a": [1.0 / 3.0, 2], "b": { "c": 2.0 / 3.0 } });
        round_json(&mut v, 6);
        assert_eq!(v, json!({ "a": [0.333333, 2], "b": { "c": 0.666667 } }));
    }

    #[test]
    fn atomic_write_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), false).unwrap();
        out.write_csv("t.csv", &["a", "b"], &[vec![Cell::Num(1.0 / 3.0), "x,y".into()]]).unwrap();
        let files = out.finish("test", json!({}), &[]).unwrap();
        assert_eq!(files, vec!["t.csv", "manifest-test.json"]);
        assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap(), "a,b\n0.333333,\"x,y\"\n");
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 2);
    }
}
