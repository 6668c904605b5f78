use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSeed {
    pub p: f64,
    pub replicate: usize,
    pub seed: u64,
}

/// Everything needed to reproduce a command's outputs. The only place
/// wall-clock values are written.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub cell_seeds: Vec<CellSeed>,
    pub versions: BTreeMap<String, String>,
    pub teacher_failures: usize,
    pub notes: Vec<String>,
    pub outputs: Vec<String>,
    pub stage_seconds: BTreeMap<String, f64>,
    pub started_unix: u64,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("cyborg".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("student_model_format".into(), crate::student::MODEL_FORMAT_VERSION.to_string());
        RunManifest {
            command: command.into(),
            args,
            config: serde_json::Value::Null,
            master_seed: None,
            cell_seeds: Vec::new(),
            versions,
            teacher_failures: 0,
            notes: Vec::new(),
            outputs: Vec::new(),
            stage_seconds: BTreeMap::new(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            clock: Some(Instant::now()),
        }
    }

    pub fn config(&mut self, value: &impl Serialize) {
        self.config = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
    }

    /// Time a stage and record its duration.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stage_seconds.insert(name.into(), t.elapsed().as_secs_f64());
        out
    }

    pub fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn write(&mut self, dir: &Path) -> Result<()> {
        if let Some(c) = self.clock {
            self.stage_seconds.insert("total".into(), c.elapsed().as_secs_f64());
        }
        self.outputs.sort();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
