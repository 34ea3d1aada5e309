//! Artifact writing. Every command renders its outputs in memory first;
//! [`Artifacts::commit`] then writes each file through a temporary file in
//! the target directory and renames it into place, finishing with the run
//! manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use nary_schema::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    #[serde(rename = "nary-schema")]
    pub core: &'static str,
    #[serde(rename = "nary-schema-cli")]
    pub cli: &'static str,
}

/// Machine-readable record of one command run. Contains no timestamps or
/// absolute paths, so reruns with the same settings produce the same bytes.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub versions: Versions,
    pub seed: Option<u64>,
    /// SHA-256 of the canonical JSON of `settings`.
    pub config_hash: String,
    pub settings: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// An input file read fully into memory, remembered for the manifest.
pub struct Input {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

impl Input {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Ok(Self { path: path.to_path_buf(), bytes })
    }

    fn digest(&self) -> FileDigest {
        let file = self.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        FileDigest { file, sha256: sha256_hex(&self.bytes) }
    }
}

pub struct Artifacts {
    command: &'static str,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(command: &'static str) -> Self {
        Self { command, files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every artifact and `<command>.manifest.json` into `dir`.
    pub fn commit(self, dir: &Path, seed: Option<u64>, settings: serde_json::Value, inputs: &[&Input]) -> Result<()> {
        let config_hash = sha256_hex(&serde_json::to_vec(&settings)?);
        let manifest = Manifest {
            command: self.command.to_string(),
            versions: Versions { core: nary_schema::VERSION, cli: env!("CARGO_PKG_VERSION") },
            seed,
            config_hash,
            settings,
            inputs: inputs.iter().map(|i| i.digest()).collect(),
            outputs: self
                .files
                .iter()
                .map(|(name, bytes)| FileDigest { file: name.clone(), sha256: sha256_hex(bytes) })
                .collect(),
        };
        let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
        manifest_bytes.push(b'\n');

        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            write_atomic(&dir.join(name), bytes)?;
        }
        write_atomic(&dir.join(format!("{}.manifest.json", self.command)), &manifest_bytes)?;
        log::info!("wrote {} files to {}", self.files.len() + 1, dir.display());
        Ok(())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn commit_writes_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new("demo");
        a.add("x.txt", b"hello".to_vec());
        a.commit(dir.path(), Some(3), serde_json::json!({"k": 1}), &[]).unwrap();
        assert_eq!(std::fs::read(dir.path().join("x.txt")).unwrap(), b"hello");
        let m: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("demo.manifest.json")).unwrap()).unwrap();
        assert_eq!(m["seed"], 3);
        assert_eq!(m["config_hash"], sha256_hex(br#"{"k":1}"#));
        assert_eq!(m["outputs"][0]["sha256"], sha256_hex(b"hello"));
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 2);
    }
}
