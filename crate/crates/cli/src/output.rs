//! Deterministic result emission.
//!
//! Every emitted file embeds the SHA-256 of the experiment config it came
//! from and the tool version, so results can be traced back to their exact
//! inputs. CSV files carry those as leading `#` comment lines followed by a
//! header row; floats are written in scientific notation with 17
//! significant digits for cross-language reproducibility. Reruns with the
//! same config and seed are byte-identical.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where results go, plus the provenance fields embedded in every file.
#[derive(Debug, Clone)]
pub struct OutputCtx {
    pub out_dir: PathBuf,
    pub config_sha256: String,
}

impl OutputCtx {
    pub fn new(out_dir: impl Into<PathBuf>, config_bytes: &[u8]) -> anyhow::Result<Self> {
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Self { out_dir, config_sha256: sha256_hex(config_bytes) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Write `{"config_sha256", "version", "report": value}` as pretty JSON.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        let doc = serde_json::json!({
            "config_sha256": self.config_sha256,
            "version": VERSION,
            "report": value,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<CsvValue>>,
    ) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        let file = fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "# config_sha256={}", self.config_sha256)?;
        writeln!(w, "# version={}", VERSION)?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            let mut first = true;
            for v in row {
                if !first {
                    write!(w, ",")?;
                }
                write!(w, "{v}")?;
                first = false;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// A single CSV cell.
#[derive(Debug, Clone)]
pub enum CsvValue {
    Int(u64),
    Float(f64),
    Text(String),
    Missing,
}

impl fmt::Display for CsvValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsvValue::Int(v) => write!(f, "{v}"),
            // 17 significant digits round-trip any f64
            CsvValue::Float(v) => write!(f, "{v:.16e}"),
            CsvValue::Text(s) => write!(f, "{s}"),
            CsvValue::Missing => Ok(()),
        }
    }
}

impl From<usize> for CsvValue {
    fn from(v: usize) -> Self {
        CsvValue::Int(v as u64)
    }
}

impl From<f64> for CsvValue {
    fn from(v: f64) -> Self {
        CsvValue::Float(v)
    }
}

impl From<Option<f64>> for CsvValue {
    fn from(v: Option<f64>) -> Self {
        v.map_or(CsvValue::Missing, CsvValue::Float)
    }
}

/// Read a config file and build the output context in one step.
pub fn load_config<T: serde::de::DeserializeOwned>(
    config_path: &Path,
    out_dir: &Path,
) -> anyhow::Result<(T, OutputCtx)> {
    let bytes = fs::read(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let cfg = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing config {}", config_path.display()))?;
    let ctx = OutputCtx::new(out_dir, &bytes)?;
    Ok((cfg, ctx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_format_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = OutputCtx::new(dir.path(), b"{}").unwrap();
        let rows = vec![vec![CsvValue::Int(3), CsvValue::Float(0.1), CsvValue::Missing]];
        let path = ctx.write_csv("t.csv", &["a", "b", "c"], rows).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# config_sha256="));
        assert!(lines[1].starts_with("# version="));
        assert_eq!(lines[2], "a,b,c");
        assert_eq!(lines[3], "3,1.0000000000000001e-1,");
    }

    #[test]
    fn sha256_of_empty_config_matches_known_value() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
