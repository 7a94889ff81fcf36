//! Optional TOML config file. Every key mirrors a flag; flags win.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub kb: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub theta: Option<f64>,
    pub fixpoint: Option<bool>,
    pub batch: Option<String>,
    pub min_support_count: Option<usize>,
    pub min_confidence: Option<f64>,
    pub max_hops: Option<usize>,
    pub counts: Option<String>,
    pub allow_ambiguous: Option<bool>,
    pub deltas: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths in the file are relative to the file itself.
        if let Some(dir) = path.parent() {
            for p in [
                &mut cfg.kb,
                &mut cfg.aliases,
                &mut cfg.rules,
                &mut cfg.vectors,
                &mut cfg.templates,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// Flag, then config file, then `RULEKE_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> anyhow::Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .with_context(|| format!("RULEKE_SEED must be an unsigned integer, got {v:?}")),
        None => Ok(0),
    }
}
