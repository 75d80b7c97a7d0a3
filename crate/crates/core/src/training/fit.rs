use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use crate::dataio::{Split, WindowedDataset};
use crate::error::{ensure_dim, Error, Result};
use crate::evaluation::MetricsReport;
use crate::network::Model;
use crate::nncore::{argmax_rows, softmax_cross_entropy, Parameterized};

/// Training-loop settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub betas: [f64; 2],
    pub epsilon: f64,
    pub seed: u64,
    /// Stop after this many epochs without a new best validation accuracy.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            batch_size: 32,
            epochs: 30,
            betas: [0.9, 0.999],
            epsilon: 1e-8,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be a finite non-negative number"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !self.betas.iter().all(|b| (0.0..1.0).contains(b)) {
            return Err(Error::config("betas", "must lie in [0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config("epsilon", "must be positive"));
        }
        if self.patience == Some(0) {
            return Err(Error::config("patience", "must be at least 1 when set"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.betas[0],
            beta2: self.betas[1],
            epsilon: self.epsilon,
        }
    }
}

/// One line of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Parameters from the epoch with the best validation accuracy (the
    /// untouched initial model when no epoch ran).
    pub model: Model<f32>,
    pub history: Vec<EpochRecord>,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
}

pub(crate) fn check_dataset(model: &Model<f32>, ds: &WindowedDataset) -> Result<()> {
    ensure_dim("dataset", "channels", model.config.in_channels, ds.channels)?;
    ensure_dim("dataset", "window length", model.config.window_len, ds.window_len)?;
    ensure_dim("dataset", "classes", model.config.num_classes, ds.num_classes())
}

/// Predicted class for each window in `indices`.
pub fn predict(model: &Model<f32>, ds: &WindowedDataset, indices: &[usize], batch_size: usize) -> Result<Vec<usize>> {
    check_dataset(model, ds)?;
    let mut preds = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(batch_size.max(1)) {
        preds.extend(argmax_rows(&model.forward(&ds.batch(chunk))?));
    }
    Ok(preds)
}

/// Mean cross-entropy of a frozen model over `indices`.
pub fn mean_loss(model: &Model<f32>, ds: &WindowedDataset, indices: &[usize], batch_size: usize) -> Result<f64> {
    check_dataset(model, ds)?;
    if indices.is_empty() {
        return Err(Error::Empty { what: "mean_loss" });
    }
    let mut total = 0.0f64;
    for chunk in indices.chunks(batch_size.max(1)) {
        let (loss, _) = softmax_cross_entropy(&model.forward(&ds.batch(chunk))?, &ds.batch_labels(chunk))?;
        total += loss as f64 * chunk.len() as f64;
    }
    Ok(total / indices.len() as f64)
}

/// Metrics of `model` on one split.
pub fn evaluate(model: &Model<f32>, ds: &WindowedDataset, split: Split, batch_size: usize) -> Result<MetricsReport> {
    let idx = ds.indices(split);
    if idx.is_empty() {
        return Err(Error::EmptySplit(split.name()));
    }
    let preds = predict(model, ds, &idx, batch_size)?;
    MetricsReport::compute(&preds, &ds.batch_labels(&idx), ds.num_classes())
}

fn accuracy_on(model: &Model<f32>, ds: &WindowedDataset, idx: &[usize], batch_size: usize) -> Result<f64> {
    let preds = predict(model, ds, idx, batch_size)?;
    let hits = preds.iter().zip(idx).filter(|(p, &i)| **p == ds.labels[i]).count();
    Ok(hits as f64 / idx.len() as f64)
}

/// [`fit_with`] without a progress callback.
pub fn fit(model: Model<f32>, ds: &WindowedDataset, cfg: &TrainConfig) -> Result<FitOutcome> {
    fit_with(model, ds, cfg, |_| {})
}

/// Mini-batch Adam training with best-validation-accuracy checkpoint
/// selection. `on_epoch` sees each history record as soon as it exists.
pub fn fit_with(
    mut model: Model<f32>,
    ds: &WindowedDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitOutcome> {
    cfg.validate()?;
    check_dataset(&model, ds)?;
    let mut train = ds.indices(Split::Train);
    let val = ds.indices(Split::Val);
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(Error::EmptySplit("val"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam(), &model.params_mut());
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_acc = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        train.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for chunk in train.chunks(cfg.batch_size) {
            let (logits, cache) = model.forward_train(&ds.batch(chunk))?;
            let (loss, grad) = softmax_cross_entropy(&logits, &ds.batch_labels(chunk))?;
            loss_sum += loss as f64 * chunk.len() as f64;
            model.zero_grad();
            model.backward(&grad, &cache)?;
            adam.step(model.params_mut())?;
        }
        let val_accuracy = accuracy_on(&model, ds, &val, cfg.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_accuracy,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        on_epoch(&record);
        history.push(record);
        if val_accuracy > best_acc {
            best_acc = val_accuracy;
            best_epoch = epoch;
            best = model.clone();
        }
        if cfg.patience.is_some_and(|p| epoch - best_epoch >= p) {
            break;
        }
    }
    Ok(FitOutcome {
        model: best,
        history,
        best_epoch,
    })
}
