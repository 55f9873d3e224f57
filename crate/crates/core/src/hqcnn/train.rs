//! Mini-batch training with plain SGD or Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::head::{loss_from_logits, LossMode};
use super::model::Model;
use crate::error::{Error, Result};
use crate::scenario::{LsfMatrix, SystemConfig};
use crate::throughput::PilotAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub mode: LossMode,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            mode: LossMode::Supervised,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 16,
            optimizer: Optimizer::Sgd,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    /// Default step size for each mode.
    pub fn for_mode(mode: LossMode) -> Self {
        let learning_rate = match mode {
            LossMode::Supervised => 0.05,
            LossMode::Unsupervised => 0.01,
        };
        TrainingConfig { mode, learning_rate, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig { field: "learning_rate", reason: "must be finite and non-negative".into() });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig { field: "epochs", reason: "must be at least 1".into() });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig { field: "batch_size", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// One training example: normalized input, raw fading matrix and optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub x: Vec<f64>,
    pub beta: LsfMatrix,
    pub label: Option<PilotAssignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Mean loss over the training set; entry 0 is before the first update.
    pub loss: Vec<f64>,
    /// `(loss[0] - loss[e]) / |loss[0]|`.
    pub proportion: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

impl TrainingHistory {
    fn push(&mut self, loss: f64, seconds: f64) {
        let first = *self.loss.first().unwrap_or(&loss);
        self.loss.push(loss);
        self.proportion.push(if first == 0.0 { 0.0 } else { (first - loss) / first.abs() });
        self.epoch_seconds.push(seconds);
    }

    /// Share of the overall loss drop achieved after `epoch` epochs.
    pub fn reduction_share(&self, epoch: usize) -> Option<f64> {
        let first = *self.loss.first()?;
        let last = *self.loss.last()?;
        let at = *self.loss.get(epoch)?;
        let total = first - last;
        (total > 0.0).then(|| (first - at) / total)
    }
}

fn sample_loss_grad(model: &Model, s: &TrainingSample, system: &SystemConfig, mode: LossMode) -> Result<(f64, Vec<f64>)> {
    let mut head = |logits: &[f64]| loss_from_logits(logits, mode, &s.beta, s.label.as_ref(), system);
    model.value_and_grad(&s.x, &mut head)
}

/// Batch-averaged loss and gradient.
pub fn model_gradient(
    model: &Model,
    batch: &[&TrainingSample],
    system: &SystemConfig,
    mode: LossMode,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    let mut grad = vec![0.0; model.params().len()];
    for s in batch {
        let (l, g) = sample_loss_grad(model, s, system, mode)?;
        total += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Mean loss over `samples` (forward passes only).
pub fn dataset_loss(model: &Model, samples: &[TrainingSample], system: &SystemConfig, mode: LossMode) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut total = 0.0;
    for s in samples {
        total += loss_from_logits(&model.logits(&s.x)?, mode, &s.beta, s.label.as_ref(), system)?.0;
    }
    Ok(total / samples.len() as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

pub fn train(model: &mut Model, samples: &[TrainingSample], system: &SystemConfig, config: &TrainingConfig) -> Result<TrainingHistory> {
    train_with(model, samples, system, config, &mut |_, _| {})
}

/// Like [`train`], reporting `(epoch, loss)` after every epoch.
///
/// On divergence the model is left at the last parameters with a finite loss.
pub fn train_with(
    model: &mut Model,
    samples: &[TrainingSample],
    system: &SystemConfig,
    config: &TrainingConfig,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<TrainingHistory> {
    config.validate()?;
    model.check()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    if config.mode == LossMode::Supervised {
        if let Some(i) = samples.iter().position(|s| s.label.is_none()) {
            return Err(Error::InvalidArgument(format!("sample {i} has no label for supervised training")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut adam = Adam { m: vec![0.0; model.params().len()], v: vec![0.0; model.params().len()], t: 0 };
    let mut history = TrainingHistory { loss: Vec::new(), proportion: Vec::new(), epoch_seconds: Vec::new() };

    let initial = dataset_loss(model, samples, system, config.mode)?;
    if !initial.is_finite() {
        return Err(Error::Diverged { epoch: 0, reason: format!("initial loss is {initial}") });
    }
    history.push(initial, 0.0);
    on_epoch(0, initial);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let good = model.params().to_vec();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainingSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (loss, grad) = model_gradient(model, &batch, system, config.mode)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                model.params_mut().copy_from_slice(&good);
                return Err(Error::Diverged { epoch, reason: format!("non-finite batch loss or gradient (loss {loss})") });
            }
            match config.optimizer {
                Optimizer::Sgd => model
                    .params_mut()
                    .iter_mut()
                    .zip(&grad)
                    .for_each(|(p, g)| *p -= config.learning_rate * g),
                Optimizer::Adam => adam.step(model.params_mut(), &grad, config.learning_rate),
            }
        }
        let loss = dataset_loss(model, samples, system, config.mode)?;
        if !loss.is_finite() {
            model.params_mut().copy_from_slice(&good);
            return Err(Error::Diverged { epoch, reason: format!("training loss became {loss}") });
        }
        history.push(loss, started.elapsed().as_secs_f64());
        on_epoch(epoch, loss);
    }
    Ok(history)
}
