//! Run configuration file: agent and environment settings plus run metadata.

use std::fs;
use std::path::{Path, PathBuf};

use ddqn_core::{AgentConfig, EnvConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunMeta {
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub eval_trials: usize,
    pub eval_seed: u64,
    pub out_dir: Option<PathBuf>,
    pub axes: Vec<String>,
    pub threads: usize,
}

impl Default for RunMeta {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: vec![0],
            eval_trials: 100,
            eval_seed: 0,
            out_dir: None,
            axes: Vec::new(),
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub agent: AgentConfig,
    pub env: EnvConfig,
    pub run: RunMeta,
}

impl RunConfigFile {
    /// Missing path means all defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.agent
            .validate()
            .and_then(|_| cfg.env.validate())
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        Ok(cfg)
    }
}
