//! Output directory handling, provenance and JSON helpers.

use std::path::{Path, PathBuf};

use cmsynth_core::geometry::WireGeometry;
use cmsynth_core::io::to_json;
use cmsynth_core::linalg::CVector;
use cmsynth_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Identifies the inputs and tool versions behind an output file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    /// SHA-256 of the resolved configuration (output directory excluded).
    pub config_sha256: String,
    /// SHA-256 of the wire geometry actually analyzed.
    pub geometry_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub coupling: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig, geometry: &WireGeometry, seed: Option<u64>, coupling: bool) -> Result<Self> {
        let hashed = RunConfig {
            output_dir: None,
            ..cfg.clone()
        };
        Ok(Self {
            tool: "cmsynth",
            version: env!("CARGO_PKG_VERSION"),
            core_version: cmsynth_core::VERSION,
            command: command.to_string(),
            config_sha256: sha256_hex(to_json(&hashed)?.as_bytes()),
            geometry_sha256: sha256_hex(to_json(geometry)?.as_bytes()),
            seed,
            coupling,
        })
    }
}

/// Writes files below one directory and remembers their names.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&root)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json(value)?)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Complex vector as `[re, im]` pairs.
pub fn pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Wraps a payload with its provenance block.
#[derive(Serialize)]
pub struct Document<'a, T: Serialize> {
    pub provenance: &'a Provenance,
    #[serde(flatten)]
    pub body: T,
}
