//! Run directories, manifests and output digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Everything a command produces; written verbatim to the run directory.
#[derive(Debug, Default)]
pub struct Outputs {
    pub csv: Option<String>,
    pub json: Option<Value>,
    pub raster: Option<Vec<u8>>,
    /// Extra CSV files by name.
    pub extra: Vec<(String, String)>,
    /// Printed to stdout after the files are written.
    pub summary: String,
}

impl Outputs {
    /// `(file name, bytes)` in a fixed order.
    pub fn files(&self) -> Result<Vec<(String, Vec<u8>)>, CliError> {
        let mut files = Vec::new();
        if let Some(csv) = &self.csv {
            files.push(("results.csv".to_string(), csv.clone().into_bytes()));
        }
        if let Some(json) = &self.json {
            let mut text = serde_json::to_string_pretty(json).map_err(CliError::io)?;
            text.push('\n');
            files.push(("results.json".to_string(), text.into_bytes()));
        }
        if let Some(raster) = &self.raster {
            files.push(("raster.pgm".to_string(), raster.clone()));
        }
        for (name, body) in &self.extra {
            files.push((name.clone(), body.clone().into_bytes()));
        }
        Ok(files)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Resolved settings, enough to replay the run.
    pub config: Value,
    pub seeds: Vec<u64>,
    pub version: String,
    pub workers: usize,
    pub wall_time_s: f64,
    /// SHA-256 of each output file.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<root>/<command>-<first 12 hex digits of the config digest>`.
pub fn run_dir(root: &Path, command: &str, config: &Value) -> PathBuf {
    let canonical = serde_json::to_string(config).unwrap_or_default();
    let digest = sha256_hex(canonical.as_bytes());
    root.join(format!("{command}-{}", &digest[..12]))
}

pub fn write_run(
    dir: &Path,
    command: &str,
    config: &Value,
    seeds: Vec<u64>,
    started: Instant,
    outputs: &Outputs,
) -> Result<RunManifest, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io)?;
    let mut digests = BTreeMap::new();
    for (name, bytes) in outputs.files()? {
        fs::write(dir.join(&name), &bytes).map_err(CliError::io)?;
        digests.insert(name, sha256_hex(&bytes));
    }
    let manifest = RunManifest {
        command: command.to_string(),
        config: config.clone(),
        seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        workers: rayon::current_num_threads(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: digests,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(CliError::io)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST), text).map_err(CliError::io)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed {}: {e}", path.display())))
}

/// Full round-trip decimal: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// RFC 4180 table with a header row.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).map_err(CliError::io)?;
    for row in rows {
        w.write_record(&row).map_err(CliError::io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(e.into_error()))?;
    String::from_utf8(bytes).map_err(CliError::io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -1.401_155_189_092_050_6, 1e-300, 123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn csv_quotes_and_terminates() {
        let t = csv_table(&["a", "b"], [vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(t, "a,b\r\n1,\"x,y\"\r\n");
    }

    #[test]
    fn run_dir_depends_on_config() {
        let a = run_dir(Path::new("runs"), "stats", &serde_json::json!({"seed": 1}));
        let b = run_dir(Path::new("runs"), "stats", &serde_json::json!({"seed": 2}));
        assert_ne!(a, b);
        assert!(a.file_name().unwrap().to_str().unwrap().starts_with("stats-"));
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
