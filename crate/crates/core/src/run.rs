//! Provenance helpers shared by training and evaluation outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// SHA-256 (hex) of the compact JSON form of a resolved configuration.
/// Struct fields serialize in declaration order, so equal configs give equal digests.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Comment lines opening every CSV the crate writes.
pub fn provenance_header(digest: &str, seed: u64) -> String {
    format!("# config_digest={digest}\n# seed={seed}\n")
}

/// Line-oriented CSV writer that surfaces I/O errors with the file path.
pub struct CsvWriter {
    path: std::path::PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: impl AsRef<Path>, digest: &str, seed: u64, header: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            path,
            out: BufWriter::new(file),
        };
        w.raw(&provenance_header(digest, seed))?;
        w.row(header)?;
        Ok(w)
    }

    fn raw(&mut self, s: &str) -> Result<()> {
        self.out
            .write_all(s.as_bytes())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn row(&mut self, line: &str) -> Result<()> {
        self.raw(line)?;
        self.raw("\n")
    }

    /// Flushes buffered rows so a crash loses nothing already logged.
    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl Drop for CsvWriter {
    fn drop(&mut self) {
        let _ = self.out.flush();
    }
}

/// Fixed-precision float for reports; NaN renders as `nan`.
pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}
