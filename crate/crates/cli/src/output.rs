//! Staged output directories and run manifests.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{user, CliError, Result};

pub const MANIFEST: &str = "manifest.json";

fn io_err(path: &Path, e: io::Error) -> CliError {
    user(format!("{}: {e}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a file, or of a directory's regular files (name and content,
/// sorted by name, manifests excluded).
pub fn digest_path(path: &Path) -> Result<String> {
    let meta = fs::metadata(path).map_err(|e| io_err(path, e))?;
    if meta.is_file() {
        return Ok(sha256_hex(&fs::read(path).map_err(|e| io_err(path, e))?));
    }
    let mut names: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| io_err(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != MANIFEST))
        .collect();
    names.sort();
    let mut h = Sha256::new();
    for p in names {
        let name = p.file_name().expect("file has a name").to_string_lossy().into_owned();
        h.update(name.as_bytes());
        h.update([0]);
        h.update(Sha256::digest(fs::read(&p).map_err(|e| io_err(&p, e))?));
    }
    Ok(hex::encode(h.finalize()))
}

/// What a run needs to be reproduced.
pub struct Manifest {
    pub command: &'static str,
    /// Effective configuration after applying file values and flags.
    pub config: Value,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &'static str, config: Value, seed: u64) -> Self {
        Self {
            command,
            config,
            seed,
            inputs: Vec::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    fn to_json(&self, outputs: &[(String, String)]) -> Result<String> {
        // serde_json maps are ordered by key, so this text is canonical.
        let config_text = serde_json::to_string(&self.config).expect("config serializes");
        let inputs = self
            .inputs
            .iter()
            .map(|p| Ok(json!({ "path": p.display().to_string(), "sha256": digest_path(p)? })))
            .collect::<Result<Vec<_>>>()?;
        let outputs: Vec<Value> = outputs.iter().map(|(n, d)| json!({ "path": n, "sha256": d })).collect();
        let v = json!({
            "command": self.command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "config": self.config,
            "config_hash": sha256_hex(config_text.as_bytes()),
            "seed": self.seed,
            "versions": {
                "ssp-cli": env!("CARGO_PKG_VERSION"),
                "ssp-core": ssp_core::VERSION,
                "ssp-nn": ssp_nn::VERSION,
            },
            "inputs": inputs,
            "outputs": outputs,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("manifest serializes");
        s.push('\n');
        Ok(s)
    }
}

/// A hidden sibling directory that becomes `target` on commit and is
/// deleted otherwise.
pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    files: Vec<(String, String)>,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        check_replaceable(target)?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| io_err(&parent, e))?;
        let name = target
            .file_name()
            .ok_or_else(|| user(format!("output path {} has no final component", target.display())))?
            .to_string_lossy();
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        fs::create_dir(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self {
            target: target.to_path_buf(),
            dir,
            files: Vec::new(),
            committed: false,
        })
    }

    /// Path inside the staging directory, for writers that need one.
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records a file written directly to [`Staging::path`].
    pub fn record(&mut self, name: &str) -> Result<()> {
        let p = self.path(name);
        let d = digest_path(&p)?;
        self.files.push((name.to_string(), d));
        Ok(())
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, contents.as_ref()).map_err(|e| io_err(&p, e))?;
        self.files.push((name.to_string(), sha256_hex(contents.as_ref())));
        Ok(())
    }

    /// Writes the manifest and moves the outputs into place.
    pub fn commit(mut self, manifest: &Manifest) -> Result<PathBuf> {
        let text = manifest.to_json(&self.files)?;
        let p = self.path(MANIFEST);
        fs::write(&p, text).map_err(|e| io_err(&p, e))?;
        check_replaceable(&self.target)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| io_err(&self.target, e))?;
        }
        fs::rename(&self.dir, &self.target).map_err(|e| io_err(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Only empty directories and earlier outputs of this tool are replaced.
fn check_replaceable(target: &Path) -> Result<()> {
    if !target.exists() {
        return Ok(());
    }
    if !target.is_dir() {
        return Err(user(format!("output {} exists and is not a directory", target.display())));
    }
    let empty = fs::read_dir(target).map_err(|e| io_err(target, e))?.next().is_none();
    if empty || target.join(MANIFEST).is_file() {
        Ok(())
    } else {
        Err(user(format!(
            "output directory {} is not empty and holds no {MANIFEST}; refusing to replace it",
            target.display()
        )))
    }
}
