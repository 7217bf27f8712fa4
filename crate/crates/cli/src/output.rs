//! Artifact writers. Every file carries the format version and the resolved
//! configuration.

use crate::error::CliError;
use ringwave::fields::{save_field, FieldMeta, ScalarField};
use serde_json::{json, Map, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;

/// `<prefix><suffix>`, e.g. `out/ring` + `.json`.
pub fn artifact(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// A JSON summary: format tags, the resolved config, then `body`.
pub fn summary(command: &str, config: &Value, body: Value) -> Value {
    let mut m = Map::new();
    m.insert("format".into(), json!("ringwave-summary"));
    m.insert("format_version".into(), json!(FORMAT_VERSION));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), config.clone());
    if let Value::Object(body) = body {
        m.extend(body);
    }
    Value::Object(m)
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Field file trailer: format tag plus the config as `key=value` lines.
pub fn field_meta(command: &str, config: &Value, a: Option<f64>) -> FieldMeta {
    let mut s = format!("format_version={FORMAT_VERSION}\ncommand={command}\n");
    s.push_str(&crate::config::to_lines(config));
    FieldMeta { a, config: s }
}

pub fn write_field(path: &Path, field: &ScalarField, meta: &FieldMeta) -> Result<(), CliError> {
    save_field(path, field, meta)?;
    Ok(())
}

/// Round-trip formatting for machine-readable output.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// A small table rendered either aligned (stdout) or as CSV (files).
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn aligned(&self) -> String {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut s = String::new();
        let line = |s: &mut String, cells: &[String]| {
            let cells: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(s, "{}", cells.join("  ").trim_end());
        };
        line(&mut s, &self.header);
        for r in &self.rows {
            line(&mut s, r);
        }
        s
    }

    /// CSV with `#`-comment lines carrying the format version and config.
    pub fn write_csv(&self, path: &Path, command: &str, config: &Value) -> Result<(), CliError> {
        let mut s = format!("# ringwave-csv format_version={FORMAT_VERSION} command={command}\n");
        for l in crate::config::to_lines(config).lines() {
            let _ = writeln!(s, "# {l}");
        }
        s.push_str(&self.csv());
        std::fs::write(path, s)?;
        Ok(())
    }
}
