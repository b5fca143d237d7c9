use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::llmclient::BackendConfig;
use crate::modgen::DatasetProtocol;
use crate::promptkit::{PromptConfig, PromptMode};
use crate::stats::SummaryConfig;

/// Everything that determines a run's results. Written to `config.json` in
/// the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub protocol: DatasetProtocol,
    pub mode: PromptMode,
    pub prompt: PromptConfig,
    pub summary: SummaryConfig,
    pub backend: BackendConfig,
    /// Run directory. Excluded from the config hash.
    pub output_dir: PathBuf,
    /// Store full prompt text in the transcript, not only its hash.
    pub keep_prompts: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: DatasetProtocol::default(),
            mode: PromptMode::InstructionContextSuffix,
            prompt: PromptConfig::default(),
            summary: SummaryConfig::default(),
            backend: BackendConfig::default(),
            output_dir: PathBuf::from("runs/latest"),
            keep_prompts: false,
        }
    }
}

impl RunConfig {
    /// Loads TOML (`.toml`) or JSON (anything else). Missing fields take defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.backend.validate()?;
        if self.mode == PromptMode::InstructionContextSuffix && self.protocol.exemplars_per_class == 0 {
            bail!("I+C+S mode needs at least one exemplar per class");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with `output_dir` removed. Object
    /// keys are sorted, so field order in the source file does not matter.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("RunConfig serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        let canonical = serde_json::to_string(&v).expect("Value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.protocol.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn toml_and_json_load_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "mode = \"is\"\n[protocol]\ntest_count = 100\n[backend]\nkind = \"mock\"\n").unwrap();
        let cfg = RunConfig::load(&t).unwrap();
        assert_eq!(cfg.mode, PromptMode::InstructionSuffix);
        assert_eq!(cfg.protocol.test_count, 100);
        assert_eq!(cfg.protocol.master_seed, 42);

        let j = dir.path().join("c.json");
        cfg.write_json(&j).unwrap();
        let back = RunConfig::load(&j).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.protocol.test_count = 15;
        assert!(cfg.validate().is_err());
    }
}
