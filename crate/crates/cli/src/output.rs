//! CSV and JSON writers. Every file starts with the config hash and the
//! constants in force, so results can be matched to their inputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Provenance shared by all files of one command run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stamp {
    pub config_sha256: String,
    pub seed: u64,
    pub epsilon: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Stamp {
    fn comment_lines(&self) -> [String; 2] {
        [
            format!("# config_sha256={}", self.config_sha256),
            format!("# seed={} epsilon={} k1={} k2={} k3={}", self.seed, self.epsilon, self.k1, self.k2, self.k3),
        ]
    }
}

pub struct Writer {
    pub dir: PathBuf,
    pub stamp: Stamp,
    pub files: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, stamp: Stamp) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), stamp, files: Vec::new() })
    }

    /// Writes `rows` under a header. Numbers should already be formatted;
    /// see [`num`].
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        for line in self.stamp.comment_lines() {
            writeln!(file, "{line}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let v = json!({ "stamp": self.stamp, "result": body });
        let mut text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        self.files.push(path.clone());
        Ok(path)
    }
}

/// Shortest round-trip decimal form, so identical values print identically.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}
