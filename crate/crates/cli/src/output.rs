//! Artifact writers. Every file goes through a temporary sibling and a rename,
//! so readers never see a partially written artifact.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {msg}")]
pub struct WriteError {
    pub path: String,
    pub msg: String,
}

fn fail(path: &Path, msg: impl ToString) -> WriteError {
    WriteError {
        path: path.display().to_string(),
        msg: msg.to_string(),
    }
}

/// Output directory plus the list of files written so far.
#[derive(Debug)]
pub struct Sink {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl Sink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, WriteError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| fail(&dir, e))?;
        Ok(Self { dir, written: Vec::new() })
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), WriteError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| fail(parent, e))?;
        }
        let parent = path.parent().unwrap_or(&self.dir);
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| fail(&path, e))?;
        tmp.write_all(data).map_err(|e| fail(&path, e))?;
        tmp.as_file().sync_all().map_err(|e| fail(&path, e))?;
        tmp.persist(&path).map_err(|e| fail(&path, e.error))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), WriteError> {
        self.bytes(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), WriteError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| fail(&self.dir.join(name), e))?;
        s.push('\n');
        self.text(name, &s)
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), WriteError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| fail(&self.dir.join(name), e);
        w.write_record(&table.header).map_err(err)?;
        for row in &table.rows {
            w.write_record(row).map_err(err)?;
        }
        let data = w.into_inner().map_err(|e| fail(&self.dir.join(name), e))?;
        self.bytes(name, &data)
    }
}

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip formatting; non-finite values become empty cells.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Signed-linear map from `[-scale, scale]` onto `[0, 65535]`; zero maps to 32768.
pub fn pgm_level(v: f32, scale: f32) -> u16 {
    if scale <= 0.0 || !v.is_finite() {
        return 32768;
    }
    let u = 32767.5 * (1.0 + (v / scale).clamp(-1.0, 1.0)) + 0.5;
    u.floor().clamp(0.0, 65535.0) as u16
}

/// Binary 16-bit PGM (`P5`, big-endian samples, row-major).
pub fn pgm(width: usize, height: usize, values: &[f32], scale: f32) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(values.len() * 2);
    for &v in values {
        out.extend_from_slice(&pgm_level(v, scale).to_be_bytes());
    }
    out
}
