//! Model selection, construction and parameter accounting.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use super::classical::{ClassicalModel, ClassicalVariant};
use super::head::{hard_decision, softmax_rows};
use super::quantum::{HqcnnModel, ParamSharing};
use crate::error::Result;
use crate::qsim::qcnn::CircuitLayout;
use crate::scenario::SystemConfig;
use crate::throughput::{PilotAssignment, SoftAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Hybrid model with one angle set shared by every convolution.
    Hqcnn,
    /// Hybrid model with one angle set per convolution layer.
    HqcnnHur,
    Mlp,
    CnnLight,
    CnnHeavy,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Hqcnn, ModelKind::HqcnnHur, ModelKind::Mlp, ModelKind::CnnLight, ModelKind::CnnHeavy];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Hqcnn => "hqcnn",
            ModelKind::HqcnnHur => "hqcnn-hur",
            ModelKind::Mlp => "mlp",
            ModelKind::CnnLight => "cnn-light",
            ModelKind::CnnHeavy => "cnn-heavy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, ModelKind::Hqcnn | ModelKind::HqcnnHur)
    }
}

/// Architecture knobs shared by all model kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    /// Circuit width n; also the MLP hidden width.
    pub qubits: usize,
    /// Conv+pool stages; `None` halves until two qubits remain.
    pub stages: Option<usize>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig { qubits: 8, stages: None }
    }
}

impl ArchConfig {
    pub fn layout(&self) -> Result<CircuitLayout> {
        match self.stages {
            Some(s) => CircuitLayout::ring(self.qubits, s),
            None => CircuitLayout::default_for(self.qubits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Model {
    Quantum(HqcnnModel),
    Classical(ClassicalModel),
}

pub fn build_model(kind: ModelKind, config: &SystemConfig, arch: &ArchConfig, seed: u64) -> Result<Model> {
    Ok(match kind {
        ModelKind::Hqcnn => Model::Quantum(HqcnnModel::new(config, arch.layout()?, ParamSharing::Shared, seed)?),
        ModelKind::HqcnnHur => Model::Quantum(HqcnnModel::new(config, arch.layout()?, ParamSharing::PerLayer, seed)?),
        ModelKind::Mlp => Model::Classical(ClassicalModel::new(config, ClassicalVariant::Mlp, arch.qubits, seed)?),
        ModelKind::CnnLight => {
            Model::Classical(ClassicalModel::new(config, ClassicalVariant::LightCnn, arch.qubits, seed)?)
        }
        ModelKind::CnnHeavy => {
            Model::Classical(ClassicalModel::new(config, ClassicalVariant::HeavyCnn, arch.qubits, seed)?)
        }
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Quantum(m) => match m.sharing {
                ParamSharing::Shared => ModelKind::Hqcnn,
                ParamSharing::PerLayer => ModelKind::HqcnnHur,
            },
            Model::Classical(m) => match m.variant {
                ClassicalVariant::Mlp => ModelKind::Mlp,
                ClassicalVariant::LightCnn => ModelKind::CnnLight,
                ClassicalVariant::HeavyCnn => ModelKind::CnnHeavy,
            },
        }
    }

    /// (M, K, tau_p) the model was built for.
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            Model::Quantum(m) => (m.num_aps, m.num_users, m.num_pilots),
            Model::Classical(m) => (m.num_aps, m.num_users, m.num_pilots),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Model::Quantum(m) => &m.params,
            Model::Classical(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Model::Quantum(m) => &mut m.params,
            Model::Classical(m) => &mut m.params,
        }
    }

    pub fn groups(&self) -> Vec<(String, Range<usize>)> {
        match self {
            Model::Quantum(m) => m.groups().into_iter().map(|(n, r)| (n.to_string(), r)).collect(),
            Model::Classical(m) => m.groups(),
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Model::Quantum(m) => m.check(),
            Model::Classical(m) => m.check(),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Quantum(m) => m.logits(x),
            Model::Classical(m) => m.logits(x),
        }
    }

    /// Row-stochastic pilot probabilities for a normalized input.
    pub fn forward(&self, x: &[f64]) -> Result<SoftAssignment> {
        let (_, k, t) = self.dims();
        softmax_rows(&self.logits(x)?, k, t)
    }

    pub fn assign(&self, x: &[f64]) -> Result<PilotAssignment> {
        Ok(hard_decision(&self.forward(x)?))
    }

    pub fn value_and_grad(
        &self,
        x: &[f64],
        head: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    ) -> Result<(f64, Vec<f64>)> {
        match self {
            Model::Quantum(m) => m.value_and_grad(x, head),
            Model::Classical(m) => m.value_and_grad(x, head),
        }
    }
}

/// Trainable scalars in the model.
pub fn count_parameters(model: &Model) -> usize {
    model.params().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(ModelKind::parse(k.name()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!(ModelKind::parse("transformer"), None);
    }

    #[test]
    fn counts_and_kinds() {
        let cfg = SystemConfig::with_dims(40, 2, 20, 10);
        let arch = ArchConfig::default();
        let ours = build_model(ModelKind::Hqcnn, &cfg, &arch, 1).unwrap();
        assert_eq!(count_parameters(&ours), 7023);
        assert_eq!(ours.kind(), ModelKind::Hqcnn);
        let hur = build_model(ModelKind::HqcnnHur, &cfg, &arch, 1).unwrap();
        assert_eq!(count_parameters(&hur), 7023 + 15);
        let mlp = build_model(ModelKind::Mlp, &cfg, &arch, 1).unwrap();
        assert_eq!(count_parameters(&mlp), count_parameters(&build_model(ModelKind::Mlp, &cfg, &arch, 2).unwrap()));
        for k in ModelKind::ALL {
            let m = build_model(k, &SystemConfig::default(), &arch, 3).unwrap();
            assert_eq!(m.kind(), k);
            m.check().unwrap();
        }
    }

    #[test]
    fn model_serializes() {
        let m = build_model(ModelKind::CnnLight, &SystemConfig::default(), &ArchConfig::default(), 4).unwrap();
        let back: Model = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
