use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::Serialize;
use sha2::{Digest, Sha256};
use sor_audit::ingest::CorpusManifest;
use sor_audit::report::Severity;

use crate::CliError;

pub const FINDINGS_FILE: &str = "findings.json";
pub const QUARANTINE_FILE: &str = "quarantine.log";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// The persisted record of one completed run.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRunRecord {
    pub run_id: String,
    pub timestamp: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub manifests: BTreeMap<String, CorpusManifest>,
    pub finding_counts: BTreeMap<Severity, u64>,
    pub outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn digest(path: &Path) -> Result<FileDigest, CliError> {
    let sha256 = sha256_file(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(FileDigest { path: path.display().to_string(), sha256 })
}

/// A fresh `runs/<run_id>/` directory and the record being built for it.
pub struct Run {
    pub dir: PathBuf,
    pub record: AuditRunRecord,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn create(parent: &Path, command: &str, config: serde_json::Value) -> Result<Run, CliError> {
        let now = Utc::now();
        let stamp = now.format("%Y%m%dT%H%M%S%.3fZ").to_string();
        fs::create_dir_all(parent).map_err(|e| CliError::Input(format!("{}: {e}", parent.display())))?;
        let mut n = 0u32;
        let (run_id, dir) = loop {
            let id = if n == 0 { format!("{stamp}-{command}") } else { format!("{stamp}-{command}-{n}") };
            let dir = parent.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => break (id, dir),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(CliError::Input(format!("{}: {e}", dir.display()))),
            }
        };
        Ok(Run {
            dir,
            record: AuditRunRecord {
                run_id,
                timestamp: now.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                command: command.into(),
                args: std::env::args().skip(1).collect(),
                config,
                inputs: Vec::new(),
                manifests: BTreeMap::new(),
                finding_counts: Severity::ALL.iter().map(|s| (*s, 0)).collect(),
                outputs: Vec::new(),
                notes: Vec::new(),
            },
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.record.inputs.push(digest(path)?);
        Ok(())
    }

    /// Writes an output file and registers it for the record.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        self.register(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_vec_pretty(value).expect("serializable");
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Registers a file written by other means.
    pub fn register(&mut self, path: PathBuf) {
        if !self.outputs.contains(&path) {
            self.outputs.push(path);
        }
    }

    pub fn count(&mut self, severities: impl IntoIterator<Item = Severity>) {
        for s in severities {
            *self.record.finding_counts.entry(s).or_default() += 1;
        }
    }

    /// Digests every output and writes `run.json` last.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        for path in &self.outputs {
            self.record.outputs.push(digest(path)?);
        }
        let path = self.path(RUN_FILE);
        let mut text = serde_json::to_vec_pretty(&self.record).expect("serializable");
        text.push(b'\n');
        fs::write(&path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok(self.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn run_ids_do_not_collide_and_record_is_last() {
        let dir = tempfile::tempdir().unwrap();
        let a = Run::create(dir.path(), "crosscheck", serde_json::json!({})).unwrap();
        let b = Run::create(dir.path(), "crosscheck", serde_json::json!({})).unwrap();
        assert_ne!(a.dir, b.dir);
        let mut a = a;
        a.write("findings.json", b"[]\n").unwrap();
        a.count([Severity::Warn, Severity::Warn]);
        let out = a.finish().unwrap();
        let record: serde_json::Value = serde_json::from_slice(&fs::read(out.join(RUN_FILE)).unwrap()).unwrap();
        assert_eq!(record["finding_counts"]["WARN"], 2);
        assert_eq!(record["outputs"][0]["sha256"], sha256_file(&out.join("findings.json")).unwrap());
    }
}
