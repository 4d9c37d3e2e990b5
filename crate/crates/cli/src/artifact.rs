//! Artifact output: a guarded directory writer and the provenance header
//! every report carries.
//!
//! Outputs are functions of scenario plus seed and nothing else, so two
//! runs of the same command write the same bytes.  Nothing here reads the
//! clock.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::scenario::Loaded;

/// Stamp embedded in every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    /// Hash of the scenario file bytes as read, before any flag override.
    pub scenario_sha256: String,
    /// `[x0, y0, x1, y1]`, window units.
    pub window: [f64; 4],
    pub resolution: f64,
    pub seed: u64,
    /// All lengths in reports are in window units.
    pub units: String,
}

impl Meta {
    pub fn new(command: &str, loaded: &Loaded) -> Meta {
        let w = loaded.window();
        Meta {
            command: command.to_string(),
            scenario_sha256: loaded.sha256.clone(),
            window: [w.x0, w.y0, w.x1, w.y1],
            resolution: loaded.region.resolution,
            seed: loaded.scenario.seed,
            units: "window units".to_string(),
        }
    }
}

/// Output directory with an overwrite guard.
pub struct OutDir {
    dir: PathBuf,
    force: bool,
}

impl OutDir {
    pub fn create(dir: &Path, force: bool) -> Result<OutDir> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            force,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        if path.exists() && !self.force {
            bail!(
                "{} already exists; pass --force to overwrite",
                path.display()
            );
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).context("serializing report")?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}
