//! Output directory, number formatting and run manifests.

use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Significant digits for verification artifacts.
pub const EXACT_DIGITS: usize = 17;
/// Significant digits for bulk traces.
pub const TRACE_DIGITS: usize = 10;

/// `x` in scientific notation with `digits` significant digits.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_finite() {
        format!("{:.*e}", digits - 1, x)
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct Csv {
    body: String,
    width: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut body = String::new();
        let cols: Vec<&str> = header.iter().map(|s| s.as_ref()).collect();
        body.push_str(&cols.join(","));
        body.push('\n');
        Self {
            body,
            width: cols.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        debug_assert_eq!(fields.len(), self.width);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.body.push(',');
            }
            self.body.push_str(f.as_ref());
        }
        self.body.push('\n');
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

#[derive(Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<FileDigest>,
}

/// Collects the files of one run so the manifest can list their digests.
pub struct OutDir {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(FileDigest {
            path: name.into(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(
        self,
        command: &str,
        parameters: serde_json::Value,
        seed: Option<u64>,
        started: DateTime<Utc>,
    ) -> anyhow::Result<PathBuf> {
        let manifest = RunManifest {
            command_line: std::env::args().collect(),
            command: command.into(),
            parameters,
            seed,
            code_version: env!("CARGO_PKG_VERSION").into(),
            started_at: started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            outputs: self.written,
        };
        let path = self.root.join(format!("{command}.manifest.json"));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_round_trips() {
        for x in [std::f64::consts::PI, 1e-300, -2.5e17, 0.1 + 0.2] {
            assert_eq!(sig(x, EXACT_DIGITS).parse::<f64>().unwrap(), x);
        }
        assert_eq!(sig(0.123456789012345, TRACE_DIGITS), "1.234567890e-1");
        assert_eq!(sig(f64::NAN, 17), "nan");
    }
}
