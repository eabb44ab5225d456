//! Output management: metadata headers, config hashing, and removal of
//! partial outputs when a command fails midway.

use crate::errors::CliResult;
use sha2::{Digest, Sha256};
use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};

/// Tracks every file a command writes so a failing command leaves nothing
/// behind.
pub struct OutputDir {
    dir: PathBuf,
    written: RefCell<Vec<PathBuf>>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir { dir: dir.to_path_buf(), written: RefCell::new(Vec::new()) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, content: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, content)?;
        self.written.borrow_mut().push(path.clone());
        Ok(path)
    }

    /// Deletes everything written so far (called on command failure).
    pub fn discard(&self) {
        for p in self.written.borrow().iter() {
            let _ = fs::remove_file(p);
        }
    }
}

/// Short hash over the semantically meaningful configuration: identifies a
/// run's inputs, not its output destination or rendering format.
pub fn config_hash(semantic: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(semantic).expect("serializable config");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Standard metadata header lines for machine-readable outputs.
pub fn metadata_header(command: &str, seed: Option<u64>, hash: &str) -> String {
    let mut out = format!("# simfex {}\n", env!("CARGO_PKG_VERSION"));
    match seed {
        Some(s) => out.push_str(&format!("# command={command} seed={s} config_hash={hash}\n")),
        None => out.push_str(&format!("# command={command} config_hash={hash}\n")),
    }
    out
}
