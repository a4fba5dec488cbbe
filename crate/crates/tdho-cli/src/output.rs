//! Bit-stable tabular output: CSV with 17 significant digits and a JSON run
//! manifest echoing the fully resolved configuration.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// One CSV table under construction. Numbers are rendered in scientific
/// notation with 17 significant digits; no locale formatting anywhere.
pub struct Csv {
    name: String,
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(name: &str, header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self { name: name.to_string(), buf, columns: header.len() }
    }

    pub fn row(&mut self, fields: &[Field]) {
        assert_eq!(fields.len(), self.columns, "column mismatch in {}", self.name);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match f {
                Field::F(x) => {
                    let _ = write!(self.buf, "{:.16e}", x);
                }
                Field::I(n) => {
                    let _ = write!(self.buf, "{n}");
                }
                Field::S(s) => {
                    debug_assert!(!s.contains(',') && !s.contains('"'));
                    self.buf.push_str(s);
                }
            }
        }
        self.buf.push('\n');
    }

    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(&self.name);
        fs::write(&path, self.buf.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub enum Field {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::F(x)
    }
}

impl From<i64> for Field {
    fn from(n: i64) -> Self {
        Field::I(n)
    }
}

impl From<usize> for Field {
    fn from(n: usize) -> Self {
        Field::I(n as i64)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::S(s.to_string())
    }
}

/// Run manifest: everything that influenced the outputs.
#[derive(Serialize)]
pub struct Manifest<C: Serialize, S: Serialize> {
    pub command: String,
    pub package: &'static str,
    pub version: &'static str,
    pub threads: usize,
    pub tolerance_scale: f64,
    /// Fully resolved configuration (no hidden defaults).
    pub config: C,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    /// Per-command summary values.
    pub summary: S,
}

pub fn write_manifest<C: Serialize, S: Serialize>(
    dir: &Path,
    manifest: &Manifest<C, S>,
) -> Result<PathBuf> {
    let path = dir.join("run_manifest.json");
    let text = serde_json::to_string_pretty(manifest).context("serializing manifest")?;
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
