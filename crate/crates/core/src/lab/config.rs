//! Experiment configuration files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hqcnn::{ArchConfig, TrainingConfig};
use crate::scenario::SystemConfig;

/// Dataset sizes and sampling switches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSettings {
    pub train_samples: usize,
    pub test_samples: usize,
    /// Keep one AP layout for every sample instead of redrawing it.
    pub fixed_aps: bool,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        DatasetSettings { train_samples: 500, test_samples: 100, fixed_aps: false }
    }
}

/// Everything needed to regenerate an experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub system: SystemConfig,
    pub training: TrainingConfig,
    pub arch: ArchConfig,
    pub dataset: DatasetSettings,
}

impl LabConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: LabConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.training.validate()?;
        if self.arch.qubits < 2 {
            return Err(Error::InvalidConfig { field: "qubits", reason: "need at least 2 qubits".into() });
        }
        self.arch.layout().map_err(|e| Error::InvalidConfig { field: "stages", reason: e.to_string() })?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// SHA-256 of the compact JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}
