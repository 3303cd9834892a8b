use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{argmax, softmax_cross_entropy, MlpModel};
use crate::datasets::Dataset;
use crate::{instrument, rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    /// `lr0 * (1 + cos(pi * e / epochs)) / 2` at epoch `e`, annealing to zero.
    Cosine,
    Constant,
}

impl LrSchedule {
    pub fn rate(self, lr0: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => lr0,
            LrSchedule::Cosine => {
                let phase = core::f64::consts::PI * epoch as f64 / epochs as f64;
                lr0 * 0.5 * (1.0 + libm::cos(phase))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub schedule: LrSchedule,
    /// Heavy-ball momentum; 0 is plain SGD.
    #[serde(default)]
    pub momentum: f64,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    /// Mean cross-entropy over the epoch's minibatches.
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub config: TrainConfig,
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

const EVAL_CHUNK: usize = 1024;

/// Mean loss and accuracy of `model` on a dataset.
pub fn evaluate(model: &MlpModel, data: &Dataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::range("samples", 0, ">= 1"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut loss = 0.0;
    let mut correct = 0usize;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = data.batch(chunk)?;
        let cache = model.forward(&x)?;
        let (l, _) = softmax_cross_entropy(&cache.logits, &y)?;
        loss += l * chunk.len() as f64;
        correct += (0..chunk.len())
            .filter(|&r| argmax(cache.logits.row(r)) == y[r])
            .count();
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

fn check_compatible(model: &MlpModel, data: &Dataset, name: &str) -> Result<()> {
    let spec = model.spec();
    if data.feature_dim() != spec.input_dim as usize {
        return Err(Error::Shape(format!(
            "{name} set has {} features, model input_dim is {}",
            data.feature_dim(),
            spec.input_dim
        )));
    }
    if data.n_classes() > spec.output_dim as usize {
        return Err(Error::Shape(format!(
            "{name} set has {} classes, model output_dim is {}",
            data.n_classes(),
            spec.output_dim
        )));
    }
    if data.is_empty() {
        return Err(Error::range("samples", 0, ">= 1"));
    }
    Ok(())
}

/// Minibatch SGD on softmax cross-entropy.
///
/// Stops with [`Error::Divergence`] as soon as a batch loss is not finite.
pub fn train(
    model: &mut MlpModel,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
) -> Result<TrainTrace> {
    check_compatible(model, train_set, "training")?;
    check_compatible(model, test_set, "test")?;
    if config.batch_size == 0 {
        return Err(Error::range("batch_size", 0, ">= 1"));
    }
    if !(config.lr0 >= 0.0 && config.lr0.is_finite()) {
        return Err(Error::Domain(format!("lr0 must be non-negative, got {}", config.lr0)));
    }
    if !(0.0..1.0).contains(&config.momentum) {
        return Err(Error::Domain(format!("momentum must be in [0, 1), got {}", config.momentum)));
    }
    instrument::record_training();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    let mut velocity: Option<super::Gradients> = None;
    for epoch in 0..config.epochs {
        let lr = config.schedule.rate(config.lr0, epoch, config.epochs);
        let mut r = rng::stream(config.seed, &[epoch as u64]);
        order.shuffle(&mut r);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let (x, y) = train_set.batch(chunk)?;
            let cache = model.forward(&x)?;
            correct += (0..chunk.len())
                .filter(|&k| argmax(cache.logits.row(k)) == y[k])
                .count();
            let grads = model.backward(&cache, &y)?;
            if !grads.loss.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    last_finite_epoch: (epoch > 0).then_some(epoch),
                });
            }
            loss_sum += grads.loss * chunk.len() as f64;
            if lr != 0.0 {
                if config.momentum == 0.0 {
                    model.apply_gradients(&grads, lr);
                } else {
                    let v = match velocity.as_mut() {
                        Some(v) => {
                            v.accumulate(&grads, config.momentum);
                            v
                        }
                        None => velocity.insert(grads),
                    };
                    model.apply_gradients(v, lr);
                }
            }
        }
        let n = train_set.len() as f64;
        let (_, test_acc) = evaluate(model, test_set)?;
        records.push(EpochRecord {
            epoch: epoch + 1,
            lr,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            test_acc,
        });
    }
    Ok(TrainTrace {
        config: *config,
        records,
    })
}
