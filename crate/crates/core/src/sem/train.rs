use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encode::{input_dim, target_delta, NODE_DIM};
use super::gnn::{batch_loss, BatchTarget, GnnCache, GraphBatch};
use super::SemModel;
use crate::error::{Error, Result};
use crate::lifelong::TransitionRecord;
use crate::neural::{adam_step, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Batch gradients are rescaled to at most this global norm; 0 disables.
    pub max_grad_norm: f64,
    /// Keep the weights of the best epoch (or the starting weights) rather
    /// than those of the last one.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 300, batch_size: 128, lr: super::DEFAULT_LR, max_grad_norm: 5.0, keep_best: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss of every epoch, in order.
    pub epoch_losses: Vec<f64>,
    /// Loss of the weights the model ended up with.
    pub kept_loss: f64,
    /// Epoch whose weights were kept; `None` when training never improved on
    /// the starting weights.
    pub kept_epoch: Option<usize>,
}

impl TrainReport {
    pub fn first(&self) -> Option<f64> {
        self.epoch_losses.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Encoded records laid out once so batches are row gathers.
struct Encoded {
    x: Matrix,
    delta: Matrix,
    cost: Vec<f64>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

fn encode_all(model: &SemModel, records: &[TransitionRecord]) -> Result<Encoded> {
    let batch = model.batch(records.iter().map(|r| (&r.x0, &r.theta)))?;
    let offsets = batch.offsets();
    let mut delta = Matrix::zeros(batch.x.rows(), NODE_DIM);
    for (r, &o) in records.iter().zip(&offsets) {
        for (k, d) in target_delta(&r.x0, &r.xt).iter().enumerate() {
            delta.row_mut(o + k).copy_from_slice(d);
        }
    }
    Ok(Encoded { x: batch.x, delta, cost: records.iter().map(|r| r.cost).collect(), offsets, sizes: batch.sizes })
}

fn gather(enc: &Encoded, idx: &[usize], din: usize) -> (GraphBatch, BatchTarget) {
    let sizes: Vec<usize> = idx.iter().map(|&i| enc.sizes[i]).collect();
    let total = sizes.iter().sum();
    let mut x = Matrix::zeros(total, din);
    let mut delta = Matrix::zeros(total, NODE_DIM);
    let mut row = 0;
    for &i in idx {
        for k in 0..enc.sizes[i] {
            x.row_mut(row).copy_from_slice(enc.x.row(enc.offsets[i] + k));
            delta.row_mut(row).copy_from_slice(enc.delta.row(enc.offsets[i] + k));
            row += 1;
        }
    }
    let cost = idx.iter().map(|&i| enc.cost[i]).collect();
    (GraphBatch { x, sizes }, BatchTarget { delta, cost })
}

/// Mean loss of `model` over `records`, evaluated in batches.
pub fn evaluate_loss(model: &SemModel, records: &[TransitionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Ok(0.0);
    }
    let enc = encode_all(model, records)?;
    let mut sum = 0.0;
    let idx: Vec<usize> = (0..records.len()).collect();
    for chunk in idx.chunks(256) {
        let (batch, target) = gather(&enc, chunk, input_dim(model.skill));
        let out = model.nets.forward(&batch)?;
        let (l, _, _) = batch_loss(&out, &target, &batch.sizes);
        sum += l * chunk.len() as f64;
    }
    Ok(sum / records.len() as f64)
}

fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) {
    let norm = grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().flat_map(|g| g.iter_mut()).for_each(|v| *v *= s);
    }
}

/// Trains in place, continuing from the current weights and optimizer state.
pub fn train<R: Rng + ?Sized>(
    model: &mut SemModel,
    records: &[TransitionRecord],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    if records.is_empty() {
        return Err(Error::Training(format!("no transitions to train the {} model on", model.skill)));
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    if let Some(r) = records.iter().find(|r| r.skill != model.skill) {
        return Err(Error::contract(format!("{} record in the {} training set", r.skill, model.skill)));
    }
    model.adam.lr = cfg.lr;
    let enc = encode_all(model, records)?;
    let din = input_dim(model.skill);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut grads = model.nets.zeros_like();
    let mut cache = GnnCache::default();
    let mut report = TrainReport::default();
    // Fresh networks start far off, so only trained ones are worth keeping.
    let mut best = if cfg.keep_best && model.is_trained() {
        Some((evaluate_loss(model, records)?, None, model.nets.clone(), model.adam.clone()))
    } else {
        None
    };
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let (batch, target) = gather(&enc, idx, din);
            let out = model.nets.forward_cached(&batch, &mut cache)?;
            let (loss, d_delta, d_cost) = batch_loss(&out, &target, &batch.sizes);
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite loss in epoch {epoch} of the {} model", model.skill)));
            }
            grads.zero();
            model.nets.backward(&cache, &d_delta, &d_cost, &mut grads)?;
            if cfg.max_grad_norm > 0.0 {
                clip_global_norm(&mut grads.param_slices_mut(), cfg.max_grad_norm);
            }
            let g = grads.param_slices();
            let mut p = model.nets.param_slices_mut();
            adam_step(&mut p, &g, &mut model.adam)?;
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        report.epoch_losses.push(mean);
        if cfg.keep_best && best.as_ref().map_or(true, |b| mean < b.0) {
            best = Some((mean, Some(epoch), model.nets.clone(), model.adam.clone()));
        }
    }
    report.kept_loss = report.last().unwrap_or(f64::NAN);
    report.kept_epoch = cfg.epochs.checked_sub(1);
    if let Some((loss, epoch, nets, adam)) = best {
        if epoch != report.kept_epoch {
            log::debug!("{} model keeps epoch {epoch:?} at loss {loss:.5}", model.skill);
            model.nets = nets;
            model.adam = adam;
        }
        report.kept_loss = loss;
        report.kept_epoch = epoch;
    }
    model.meta.rounds += 1;
    model.meta.epochs += cfg.epochs as u64;
    model.meta.dataset_size = records.len();
    Ok(report)
}
