use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Error in the invocation itself (flags, config schema); exits with 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Output directory; files are created on first write.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    /// `name` relative to the directory, or as given when absolute.
    pub fn path(&self, name: &Path) -> PathBuf {
        self.root.join(name)
    }

    fn create(&self, name: &Path) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, BufWriter::new(file)))
    }

    pub fn json<T: Serialize>(&self, name: impl AsRef<Path>, value: &T) -> Result<PathBuf> {
        let (path, mut w) = self.create(name.as_ref())?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn csv(&self, name: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let (path, w) = self.create(name.as_ref())?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for r in rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(path)
    }

    /// Hands a buffered writer to `f` (for library CSV writers).
    pub fn with_writer(&self, name: impl AsRef<Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
        let (path, mut w) = self.create(name.as_ref())?;
        f(&mut w)?;
        w.flush()?;
        Ok(path)
    }
}

/// Shortest round-trip formatting of a float for CSV cells.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
