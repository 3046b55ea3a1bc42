use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputFile>,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(path.display(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the config with keys sorted and whitespace removed.
pub fn config_hash(value: &Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

/// `tmp` file in the same directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display(), e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(tmp.display(), e))?;
    f.write_all(bytes).map_err(|e| CliError::io(tmp.display(), e))?;
    f.sync_all().map_err(|e| CliError::io(tmp.display(), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path.display(), e))
}

/// Every file of a run goes through here so the manifest sees it.
pub struct OutputWriter {
    dir: PathBuf,
    files: Vec<OutputFile>,
    stages: Vec<StageTiming>,
    started: Instant,
}

impl OutputWriter {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            stages: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(rel), bytes)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(OutputFile {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numerical(format!("cannot serialize {rel}: {e}")))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn outputs(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
        manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        manifest.stages = self.stages;
        manifest.outputs = self.files;
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Numerical(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_NAME), text.as_bytes())?;
        Ok(manifest)
    }
}

/// Files whose hash differs from (or is missing in) `fresh`.
pub fn compare_outputs(recorded: &[OutputFile], fresh: &[OutputFile]) -> Vec<String> {
    let mut out = Vec::new();
    for r in recorded {
        match fresh.iter().find(|f| f.path == r.path) {
            Some(f) if f.sha256 == r.sha256 => {}
            Some(_) => out.push(format!("{}: hash differs", r.path)),
            None => out.push(format!("{}: not produced", r.path)),
        }
    }
    for f in fresh {
        if !recorded.iter().any(|r| r.path == f.path) {
            out.push(format!("{}: not recorded", f.path));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writer_records_hashes_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = OutputWriter::new(dir.path()).unwrap();
        w.write("a.csv", b"N,e\n1,0\n").unwrap();
        w.write("sub/b.txt", b"x").unwrap();
        let m = w
            .finish(RunManifest {
                config_sha256: String::new(),
                version: "0".into(),
                command: "t".into(),
                seed: 0,
                threads: 1,
                started_unix: 0,
                wall_clock_seconds: 0.0,
                stages: Vec::new(),
                outputs: Vec::new(),
                exit_code: 0,
            })
            .unwrap();
        assert_eq!(m.outputs.len(), 2);
        assert_eq!(m.outputs[0].sha256, sha256_hex(b"N,e\n1,0\n"));
        let back = RunManifest::load(dir.path()).unwrap();
        assert!(compare_outputs(&back.outputs, &m.outputs).is_empty());
        assert!(!dir.path().join("a.csv.tmp").exists());
    }

    #[test]
    fn config_hash_ignores_key_order_and_spacing() {
        let a: Value = serde_json::from_str(r#"{"b": 1, "a": [1, 2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a":[1,2],"b":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn comparison_lists_every_difference() {
        let f = |p: &str, h: &str| OutputFile { path: p.into(), sha256: h.into(), bytes: 1 };
        let d = compare_outputs(&[f("a", "1"), f("b", "2")], &[f("a", "1"), f("b", "3"), f("c", "4")]);
        assert_eq!(d.len(), 2);
    }
}
