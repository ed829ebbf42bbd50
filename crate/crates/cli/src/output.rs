//! Output directory handling: every artifact is checksummed into
//! `manifest.json` alongside what is needed to rerun the command.

use crate::error::{CliError, CliResult};
use crate::formats::json_bytes;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl FileDigest {
    fn of(path: String, data: &[u8]) -> Self {
        Self {
            path,
            sha256: hex::encode(Sha256::digest(data)),
            bytes: data.len(),
        }
    }
}

/// Written last, so a manifest only exists for runs that finished.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub out: String,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

/// Contents of an input file, kept with its path for error messages.
pub struct InputFile {
    pub path: PathBuf,
    pub data: Vec<u8>,
}

pub struct OutputDir {
    dir: PathBuf,
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    /// Reads an input file once and records its checksum.
    pub fn input(&mut self, path: &Path) -> CliResult<InputFile> {
        let data = std::fs::read(path).map_err(|e| CliError::input(path, e))?;
        self.inputs.push(FileDigest::of(path.display().to_string(), &data));
        Ok(InputFile {
            path: path.to_path_buf(),
            data,
        })
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, data).map_err(|source| CliError::Output { path, source })?;
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(FileDigest::of(name.to_string(), data));
        log::debug!("wrote {name} ({} bytes)", data.len());
        Ok(())
    }

    pub fn finish(self, subcommand: &str, args: Vec<String>, seed: u64) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            args,
            seed,
            out: self.dir.display().to_string(),
            inputs: self.inputs,
            artifacts: self.artifacts,
        };
        let value = serde_json::to_value(&manifest).expect("manifest is serialisable");
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, json_bytes(&value)).map_err(|source| CliError::Output { path, source })?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_checksums() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&tmp.path().join("run")).unwrap();
        out.write("a.txt", b"abc").unwrap();
        let m = out.finish("test", vec![], 7).unwrap();
        assert_eq!(
            m.artifacts[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(tmp.path().join("run").join(MANIFEST).exists());
    }

    #[test]
    fn rewriting_replaces_the_entry() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        out.write("a.txt", b"one").unwrap();
        out.write("a.txt", b"two").unwrap();
        let m = out.finish("test", vec![], 0).unwrap();
        assert_eq!(m.artifacts.len(), 1);
        assert_eq!(m.artifacts[0].bytes, 3);
    }
}
