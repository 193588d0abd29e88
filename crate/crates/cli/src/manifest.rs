//! Run manifests: everything needed to reproduce a run bit for bit.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use lorenzmix::Error;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn config(&mut self, value: serde_json::Value) {
        self.config = value;
    }

    pub fn timing(&mut self, stage: &str, elapsed: Duration) {
        self.timings_ms.insert(stage.into(), elapsed.as_millis());
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), Error> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| Error::io(out_dir.display().to_string(), e))?;
        let path = out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::internal(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}
