//! Hybrid quantum-classical pilot-assignment network, its classical
//! baselines, losses and training loop.

pub mod classical;
pub mod head;
pub mod model;
pub mod quantum;
pub mod train;

pub use classical::{ClassicalModel, ClassicalVariant};
pub use head::{
    hard_decision, loss_from_logits, normalize_input, softmax_rows, supervised_loss, LossMode, NormStats,
};
pub use model::{build_model, count_parameters, ArchConfig, Model, ModelKind};
pub use quantum::{HqcnnModel, ParamSharing, Readout};
pub use train::{dataset_loss, model_gradient, train, train_with, Optimizer, TrainingConfig, TrainingHistory, TrainingSample};
