//! Mini-batch training with Adam, validation tracking and best-epoch snapshots.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::arch::Network;
use super::layers::{mse, Tensor};
use super::model::{FcnModel, Normalization};
use crate::dataset::SampleRecord;
use crate::error::{invalid, Error, Result};
use crate::timefreq::{RangeFft, Stft, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 100,
            batch_size: 10,
            learning_rate: adam.learning_rate,
            weight_decay: adam.weight_decay,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        self.adam().validate()
    }
}

/// Indexed (input spectrogram, target profile) pairs, both in dB.
pub trait PairSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major `frames x bins` dB image and the clean dB range profile.
    fn pair(&self, index: usize) -> Result<(Vec<f32>, Vec<f64>)>;
}

/// Evaluates independent per-sample jobs. Results must come back in index
/// order so reductions do not depend on the number of workers.
pub trait GradientRunner {
    fn map<R: Send>(&self, n: usize, job: &(dyn Fn(usize) -> R + Sync)) -> Vec<R>;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl GradientRunner for Sequential {
    fn map<R: Send>(&self, n: usize, job: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        (0..n).map(job).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Epoch 0: loss of the initial model on the training split. Later
    /// epochs: mean mini-batch loss seen during the epoch.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch (the last one without validation data).
    pub model: FcnModel,
    /// Final-epoch parameters.
    pub last_params: Vec<f32>,
    pub history: Vec<EpochRecord>,
}

fn normalized_pair(model: &FcnModel, source: &dyn PairSource, index: usize) -> Result<(Tensor<f32>, Vec<f32>)> {
    let (image, profile) = source.pair(index)?;
    let (h, w) = model.architecture.input_shape;
    if profile.len() != w {
        return Err(Error::LengthMismatch {
            what: "target profile",
            expected: w,
            actual: profile.len(),
        });
    }
    if image.len() != h * w {
        return Err(Error::LengthMismatch {
            what: "input spectrogram",
            expected: h * w,
            actual: image.len(),
        });
    }
    Ok((model.input_tensor(&image)?, model.target_vector(&profile)))
}

/// Loss and parameter gradient of one training pair.
pub fn sample_gradient(
    net: &Network,
    model: &FcnModel,
    source: &dyn PairSource,
    index: usize,
) -> Result<(f64, Vec<f32>)> {
    let (x, target) = normalized_pair(model, source, index)?;
    let cache = net.forward_train(&model.params, x)?;
    let out = cache.output().expect("non-empty network");
    let (loss, grad) = mse(&out.data, &target)?;
    let shape = out.shape();
    let (grads, _) = net.backward(&model.params, &cache, Tensor::from_vec(shape.0, shape.1, shape.2, grad)?)?;
    Ok((loss as f64, grads))
}

fn sample_loss(net: &Network, model: &FcnModel, source: &dyn PairSource, index: usize) -> Result<f64> {
    let (x, target) = normalized_pair(model, source, index)?;
    let out = net.forward(&model.params, &x)?;
    Ok(mse(&out.data, &target)?.0 as f64)
}

/// Mean per-sample MSE of `model` on `source`.
pub fn mean_loss<G: GradientRunner>(model: &FcnModel, source: &dyn PairSource, runner: &G) -> Result<f64> {
    let net = model.architecture.network()?;
    let losses = runner.map(source.len(), &|i| sample_loss(&net, model, source, i));
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / source.len().max(1) as f64)
}

/// Global min/max normalization of inputs and targets over a source.
pub fn fit_normalization(source: &dyn PairSource) -> Result<(Normalization, Normalization)> {
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..source.len() {
        let (image, profile) = source.pair(i)?;
        for &v in &image {
            xlo = xlo.min(v as f64);
            xhi = xhi.max(v as f64);
        }
        for &v in &profile {
            ylo = ylo.min(v);
            yhi = yhi.max(v);
        }
    }
    Ok((Normalization::from_range(xlo, xhi)?, Normalization::from_range(ylo, yhi)?))
}

/// Trains `model` in place of its current weights. Normalization constants
/// are refitted on `train_set`. `on_epoch` sees every history entry as it is
/// produced, starting with epoch 0 (the untrained model).
pub fn train<G: GradientRunner>(
    mut model: FcnModel,
    train_set: &dyn PairSource,
    validation: Option<&dyn PairSource>,
    cfg: &TrainConfig,
    runner: &G,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.validate()?;
    if train_set.is_empty() {
        return Err(invalid("train_set", "no training samples"));
    }
    let validation = validation.filter(|v| !v.is_empty());
    let (input_norm, target_norm) = fit_normalization(train_set)?;
    model.input_norm = input_norm;
    model.target_norm = target_norm;
    let net = model.architecture.network()?;
    let mut adam = Adam::new(cfg.adam(), model.params.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let val_loss = |m: &FcnModel| validation.map(|v| mean_loss(m, v, runner)).transpose();
    let first = EpochRecord {
        epoch: 0,
        train_loss: mean_loss(&model, train_set, runner)?,
        val_loss: val_loss(&model)?,
    };
    on_epoch(&first);
    let mut history = vec![first];
    let mut best = (first.val_loss, 0usize, model.params.clone());

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results = runner.map(batch.len(), &|i| sample_gradient(&net, &model, train_set, batch[i]));
            let mut grads = vec![0.0f32; model.params.len()];
            let mut loss = 0.0;
            for r in results {
                let (l, g) = r?;
                loss += l;
                for (acc, v) in grads.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let scale = 1.0 / batch.len() as f32;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut model.params, &grads)?;
            epoch_sum += loss;
        }
        let record = EpochRecord {
            epoch,
            train_loss: epoch_sum / train_set.len() as f64,
            val_loss: val_loss(&model)?,
        };
        if record.val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        on_epoch(&record);
        history.push(record);
        match (record.val_loss, best.0) {
            (Some(v), Some(b)) if v < b => best = (Some(v), epoch, model.params.clone()),
            (None, _) => best = (None, epoch, Vec::new()),
            _ => {}
        }
    }

    let last_params = model.params.clone();
    if best.0.is_some() {
        model.params = best.2;
    }
    model.meta.epochs_trained = cfg.epochs as u32;
    model.meta.best_epoch = best.1 as u32;
    model.meta.best_val_loss = best.0;
    model.meta.final_train_loss = history.last().map(|r| r.train_loss);
    Ok(TrainOutcome {
        model,
        last_params,
        history,
    })
}

/// Pairs computed on the fly from in-memory records: the interfered
/// spectrogram and the clean range profile.
#[derive(Debug, Clone)]
pub struct RecordPairs<'a> {
    records: &'a [SampleRecord],
    stft: Stft,
    range: RangeFft,
}

impl<'a> RecordPairs<'a> {
    pub fn new(records: &'a [SampleRecord], stft: StftConfig) -> Result<Self> {
        Ok(Self {
            records,
            range: RangeFft::new(stft.signal_len)?,
            stft: Stft::new(stft)?,
        })
    }
}

impl PairSource for RecordPairs<'_> {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn pair(&self, index: usize) -> Result<(Vec<f32>, Vec<f64>)> {
        let r = &self.records[index];
        let image = self.stft.db_image_f32(&r.interfered_f64())?;
        let target = self.range.compute(&r.clean_f64())?.magnitude_db;
        Ok((image, target))
    }
}
