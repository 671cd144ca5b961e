use anyhow::{Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qag_core::util::sha256_hex;

/// Output directory that remembers what was written, for the manifest.
pub struct OutDir {
    root: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf(), written: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(name);
        let bytes = contents.as_ref();
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s)
    }

    /// Writes `manifest.json` with the resolved config and output digests.
    pub fn finish<T: Serialize>(mut self, command: &str, seed: u64, config: &T) -> Result<()> {
        let config = serde_json::to_value(config)?;
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_hash: sha256_hex(serde_json::to_string(&config)?.as_bytes()),
            config,
            outputs: std::mem::take(&mut self.written),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_hash: String,
    config: serde_json::Value,
    /// File name to SHA-256 of its contents.
    outputs: BTreeMap<String, String>,
}
