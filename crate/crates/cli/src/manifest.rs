//! `manifest.txt`: one per output directory, in the same `key=value` format
//! as config files. Every key outside `manifest.*` and `artifact.*` is the
//! resolved configuration, so `train --config <dir>/manifest.txt` reruns
//! a training run.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use eleatt::KvConfig;

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: KvConfig,
    /// `(name, path relative to the run directory)`
    pub artifacts: Vec<(String, String)>,
    pub threads: Option<usize>,
    pub created: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: KvConfig) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config,
            artifacts: Vec::new(),
            threads: None,
            created: now(),
        }
    }

    pub fn artifact(&mut self, name: &str, path: &str) {
        self.artifacts.push((name.to_string(), path.to_string()));
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = self.config.clone();
        kv.set("manifest.command", &self.command);
        kv.set("manifest.seed", self.seed);
        kv.set("manifest.tool_version", env!("CARGO_PKG_VERSION"));
        kv.set("manifest.created", self.created);
        kv.set("manifest.updated", now());
        if let Some(t) = self.threads {
            kv.set("manifest.threads", t);
        }
        for (name, path) in &self.artifacts {
            kv.set(&format!("artifact.{name}"), path);
        }
        kv
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, self.to_kv().render())?;
        std::fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))
    }

    /// Reads a manifest back; `created` is kept so rewrites preserve it.
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let kv = KvConfig::load(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = KvConfig::new();
        let mut artifacts = Vec::new();
        for (k, v) in kv.iter() {
            if let Some(name) = k.strip_prefix("artifact.") {
                artifacts.push((name.to_string(), v.to_string()));
            } else if !k.starts_with("manifest.") {
                config.set(k, v);
            }
        }
        Ok(Self {
            command: kv.require("manifest.command")?,
            seed: kv.require("manifest.seed")?,
            config,
            artifacts,
            threads: kv.get_parsed("manifest.threads")?,
            created: kv.get_or("manifest.created", now())?,
        })
    }
}

/// Drops `manifest.*` and `artifact.*` keys, leaving plain configuration.
pub fn strip_bookkeeping(kv: &KvConfig) -> KvConfig {
    let mut out = KvConfig::new();
    for (k, v) in kv.iter() {
        if !k.starts_with("manifest.") && !k.starts_with("artifact.") {
            out.set(k, v);
        }
    }
    out
}
