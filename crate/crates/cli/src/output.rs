//! Output directory with per-file SHA-256 checksums and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUT_ENV: &str = "MADELUNG_BVP_OUT";

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Files are written as whole buffers so the checksum matches the bytes on
/// disk. The directory is created on first write.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    created: bool,
    files: Vec<OutputFile>,
}

impl OutputDir {
    /// `--out` beats `MADELUNG_BVP_OUT`, which beats `./madelung-bvp-out/<subcommand>`.
    pub fn resolve(flag: Option<&Path>, env: Option<&str>, subcommand: &str) -> PathBuf {
        match (flag, env.filter(|v| !v.is_empty())) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(e)) => PathBuf::from(e),
            (None, None) => Path::new("madelung-bvp-out").join(subcommand),
        }
    }

    pub fn new(root: PathBuf) -> Self {
        Self {
            root,
            created: false,
            files: Vec::new(),
        }
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if !self.created {
            fs::create_dir_all(&self.root).map_err(|e| {
                CliError::usage(format!(
                    "cannot create output directory {}: {e}",
                    self.root.display()
                ))
            })?;
            self.created = true;
        }
        let path = self.root.join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::numerical(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.put(name, bytes)?;
        self.files.push(OutputFile {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::numerical(format!("cannot serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Runs a CSV writer into memory, then writes the buffer.
    pub fn write_csv(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> madelung_bvp::Result<()>,
    ) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        f(&mut bytes)?;
        self.write(name, &bytes)
    }

    /// Writes `manifest.json`: `header` fields followed by the output list.
    pub fn finish(mut self, header: Value) -> Result<PathBuf, CliError> {
        let mut manifest = header;
        manifest["outputs"] = json!(self.files);
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::numerical(format!("cannot serialize manifest: {e}")))?;
        bytes.push(b'\n');
        self.put("manifest.json", &bytes)?;
        Ok(self.root)
    }
}
