use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const CONFIG_FILE: &str = "config.toml";
pub const VERSION_FILE: &str = "VERSION";

pub fn version_string() -> String {
    format!("srwa {}", env!("CARGO_PKG_VERSION"))
}

/// An output directory holding the resolved config and the tool version.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Refuses a non-empty directory unless `force`.
    pub fn create(root: &Path, force: bool, config: &ExperimentConfig) -> Result<Self> {
        if root.exists() {
            let non_empty = fs::read_dir(root).with_context(|| format!("cannot list {}", root.display()))?.next().is_some();
            if non_empty && !force {
                bail!("output directory {} is not empty; pass --force to overwrite", root.display());
            }
        }
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        let out = Self { root: root.to_path_buf() };
        out.write_text(CONFIG_FILE, &config.to_toml()?)?;
        out.write_text(VERSION_FILE, &format!("{}\n", version_string()))?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write_text(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    pub fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("cannot write {}", p.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
