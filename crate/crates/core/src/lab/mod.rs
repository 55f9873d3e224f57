//! Experiment plumbing: config files, datasets, checkpoints, benchmark and
//! noise reports, gradient audits.

pub mod benchmark;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod gradcheck;
pub mod noise;

pub use benchmark::{learned_assignment, run_benchmark, BenchmarkOptions, BenchmarkReport, BenchmarkRow, Method, CSV_HEADER};
pub use checkpoint::Checkpoint;
pub use config::{config_hash, DatasetSettings, LabConfig};
pub use dataset::{generate_dataset, Dataset, DatasetSample};
pub use gradcheck::{run_gradcheck, GradcheckReport, GroupCheck};
pub use noise::{run_noise_sweep, NoiseRow, NoiseSweep, DEFAULT_ZNE_SCALES, NOISE_CSV_HEADER};

use crate::error::{Error, Result};
use crate::hqcnn::{build_model, train_with, ModelKind, TrainingConfig, TrainingHistory};

/// Outcome of [`train_checkpoint`]: the checkpoint is always usable, even
/// when training stopped early.
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub result: Result<TrainingHistory>,
}

/// Builds a `kind` model from `config` (or continues from `init`), trains it
/// on `dataset` and packages the result.
///
/// Normalization statistics come from `dataset`, or from `init` when given.
/// On divergence the checkpoint holds the last parameters with a finite loss.
pub fn train_checkpoint(
    config: &LabConfig,
    training: &TrainingConfig,
    kind: ModelKind,
    dataset: &Dataset,
    init: Option<&Checkpoint>,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<TrainOutcome> {
    if dataset.config != config.system {
        return Err(Error::InvalidArgument("dataset was generated with a different system config".into()));
    }
    let (mut model, stats) = match init {
        Some(ck) => {
            if ck.model.kind() != kind || ck.system != config.system || ck.arch != config.arch {
                return Err(Error::InvalidArgument("initial checkpoint does not match the model kind or config".into()));
            }
            (ck.model.clone(), ck.stats)
        }
        None => {
            let stats = dataset.stats.ok_or_else(|| Error::InvalidArgument("dataset is empty".into()))?;
            (build_model(kind, &config.system, &config.arch, training.seed)?, stats)
        }
    };
    let samples = dataset.training_samples(&stats)?;
    let result = train_with(&mut model, &samples, &config.system, training, on_epoch);
    let checkpoint = Checkpoint {
        system: config.system.clone(),
        arch: config.arch.clone(),
        training: training.clone(),
        stats,
        config_hash: config.hash(),
        history: result.as_ref().ok().cloned(),
        model,
    };
    Ok(TrainOutcome { checkpoint, result })
}
