//! Output files: deterministic CSV/JSON writing with content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use qmelab_core::consistency::{CheckReport, Verdict};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::AppError;

/// Shortest decimal that reads back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = f64>) {
        let row: Vec<String> = row.into_iter().map(fmt_f64).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// RFC 4180 text, optionally preceded by one `# ` comment line.
    pub fn to_bytes(&self, comment: Option<&str>) -> Vec<u8> {
        let mut out = Vec::new();
        if let Some(c) = comment {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(c.as_bytes());
            out.push(b'\n');
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
        drop(w);
        out
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct VerdictEntry {
    pub check: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub qmelab: &'static str,
    pub qmelab_core: &'static str,
}

/// Record of one run: every emitted file with its hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub versions: Versions,
    pub wall_clock_seconds: f64,
    pub verdicts: Vec<VerdictEntry>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Single writer for one output directory.
#[derive(Debug)]
pub struct Emitter {
    dir: PathBuf,
    files: Vec<FileEntry>,
    verdicts: Vec<VerdictEntry>,
}

pub const MANIFEST: &str = "manifest.json";

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self, AppError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), verdicts: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), AppError> {
        fs::write(self.dir.join(name), bytes)?;
        log::info!("wrote {}", self.dir.join(name).display());
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table, comment: Option<&str>) -> Result<(), AppError> {
        self.write(name, &table.to_bytes(comment))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), AppError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn record(&mut self, reports: &[CheckReport]) {
        self.verdicts.extend(reports.iter().map(|r| VerdictEntry { check: r.check.clone(), verdict: r.verdict }));
    }

    pub fn verdicts(&self) -> &[VerdictEntry] {
        &self.verdicts
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes `manifest.json`, which lists every other emitted file.
    pub fn finish(self, command: &str, config: &RunConfig, wall_clock_seconds: f64) -> Result<RunManifest, AppError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config: config.clone(),
            versions: Versions { qmelab: env!("CARGO_PKG_VERSION"), qmelab_core: qmelab_core::VERSION },
            wall_clock_seconds,
            verdicts: self.verdicts,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| AppError::Config(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, 2.5e20, -7.25e-6, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(1e-9), "1e-9");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn table_bytes() {
        let mut t = Table::new(["t", "x"]);
        t.push([0.0, 1.5]);
        assert_eq!(t.to_bytes(None), b"t,x\n0,1.5\n");
        assert_eq!(t.to_bytes(Some("{\"a\":1}")), b"# {\"a\":1}\nt,x\n0,1.5\n");
        assert_eq!(Table::new(["t"]).to_bytes(None), b"t\n");
    }

    #[test]
    fn sha256_of_empty() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn emitter_lists_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = Emitter::new(dir.path()).unwrap();
        e.write("a.txt", b"abc").unwrap();
        e.write("a.txt", b"abcd").unwrap();
        let m = e.finish("check", &RunConfig::doublet(), 0.0).unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.files[0].bytes, 4);
        assert!(dir.path().join(MANIFEST).exists());
    }
}
