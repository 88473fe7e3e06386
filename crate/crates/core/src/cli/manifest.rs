use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Record of one command run, written next to its outputs. It holds no
/// timestamps, so identical runs write identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name; `royalty replay` re-runs them.
    pub args: Vec<String>,
    pub inputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub(super) fn new(command: &str, args: Vec<String>) -> Self {
        Self {
            tool: "royalty".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            inputs: BTreeMap::new(),
            config: serde_json::Value::Null,
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub(super) fn input(&mut self, name: &str, path: Option<&Path>) {
        if let Some(p) = path {
            self.inputs
                .insert(name.to_string(), p.display().to_string());
        }
    }

    pub(super) fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub(super) fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// `dir/name.ext` becomes `dir/name.manifest.json`.
pub(super) fn manifest_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}.manifest.json"))
}
