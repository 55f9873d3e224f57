//! Fading-coefficient datasets stored as JSON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use super::config::config_hash;
use crate::baselines::master_ap_assignment;
use crate::error::{Error, Result};
use crate::hqcnn::{normalize_input, NormStats, TrainingSample};
use crate::scenario::{generate_topology, generate_users, lsf_matrix, LsfMatrix, SystemConfig, Topology};
use crate::throughput::PilotAssignment;

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    /// Seed of the user drop and shadowing draw.
    pub seed: u64,
    pub topology: Topology,
    /// M x K coefficients, AP-major.
    pub beta: Vec<f64>,
    pub label: Option<PilotAssignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub version: u32,
    pub config: SystemConfig,
    pub config_hash: String,
    pub seed: u64,
    pub fixed_aps: bool,
    /// Statistics of `10 log10(beta)` over these samples; absent when empty.
    pub stats: Option<NormStats>,
    pub samples: Vec<DatasetSample>,
}

/// Draws `count` independent realizations. Per-sample seeds come from a
/// generator seeded with `seed`, so the output depends only on the inputs.
pub fn generate_dataset(config: &SystemConfig, count: usize, seed: u64, fixed_aps: bool) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared_aps = fixed_aps.then(|| generate_topology(config, seed).ap_positions);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let s: u64 = rng.random();
        let topology = match &shared_aps {
            Some(aps) => generate_users(config, aps.clone(), s),
            None => generate_topology(config, s),
        };
        let beta = lsf_matrix(&topology, config, s);
        samples.push(DatasetSample { seed: s, topology, beta: beta.0.iter().copied().collect(), label: None });
    }
    let mut ds = Dataset {
        version: DATASET_VERSION,
        config: config.clone(),
        config_hash: config_hash(config),
        seed,
        fixed_aps,
        stats: None,
        samples,
    };
    ds.stats = NormStats::fit(&ds.betas()?)?;
    Ok(ds)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn beta(&self, index: usize) -> Result<LsfMatrix> {
        LsfMatrix::from_rows(self.config.num_aps, self.config.num_users, self.samples[index].beta.clone())
    }

    pub fn betas(&self) -> Result<Vec<LsfMatrix>> {
        (0..self.len()).map(|i| self.beta(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != DATASET_VERSION {
            return Err(Error::Format(format!("dataset version {} (expected {DATASET_VERSION})", self.version)));
        }
        self.config.validate()?;
        let (m, k) = (self.config.num_aps, self.config.num_users);
        for (i, s) in self.samples.iter().enumerate() {
            if s.beta.len() != m * k || s.topology.user_positions.len() != k || s.topology.ap_positions.len() != m {
                return Err(Error::Dimension(format!("sample {i} does not match the {m}x{k} config")));
            }
            if s.beta.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
                return Err(Error::Format(format!("sample {i} has a non-positive coefficient")));
            }
            if let Some(label) = &s.label {
                label.validate(k, self.config.num_pilots)?;
            }
        }
        Ok(())
    }

    /// Attaches master-AP labels to every sample.
    pub fn label(&mut self) -> Result<()> {
        for i in 0..self.len() {
            let beta = self.beta(i)?;
            self.samples[i].label = Some(master_ap_assignment(&beta, self.config.num_pilots));
        }
        Ok(())
    }

    pub fn is_labeled(&self) -> bool {
        self.samples.iter().all(|s| s.label.is_some())
    }

    /// SHA-256 over the coefficient bytes of every sample, in order.
    pub fn realization_hash(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.samples {
            for b in &s.beta {
                h.update(b.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Normalized training samples using `stats` (typically from the training split).
    pub fn training_samples(&self, stats: &NormStats) -> Result<Vec<TrainingSample>> {
        (0..self.len())
            .map(|i| {
                let beta = self.beta(i)?;
                Ok(TrainingSample {
                    x: normalize_input(&beta, stats)?,
                    beta,
                    label: self.samples[i].label.clone(),
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        ds.validate()?;
        Ok(ds)
    }
}
