use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::loss;
use super::model::{ForwardPass, Model};
use super::optim::Optimizer;
use super::spec::TrainConfig;
use crate::error::Result;
use crate::rng::SeedTree;

/// Training-set loss and accuracy for one epoch, averaged over its batches
/// weighted by batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub steps: usize,
}

/// Callbacks from the training loop.
pub trait TrainObserver {
    /// Called after each backward pass, before the optimizer step, so the
    /// layers still hold the raw (unclipped) gradients.
    fn on_batch(&mut self, _model: &Model, _pass: &ForwardPass) {}

    /// Called once per epoch after its last update.
    fn on_epoch_end(&mut self, _epoch: usize, _model: &Model, _metrics: &EpochMetrics) {}
}

impl TrainObserver for () {}

/// Minibatch training. Divergence never aborts: NaN losses are recorded and
/// training continues.
pub fn train(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate(data.len())?;
    let shuffle = SeedTree::new(cfg.seed).child("shuffle");
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut shuffle.index(epoch as u64).rng());
        let (mut loss_sum, mut acc_sum, mut steps) = (0.0, 0.0, 0);
        for idx in order.chunks(cfg.batch_size) {
            let (xb, yb) = data.batch(idx);
            let pass = model.forward(&xb, true)?;
            let acc = loss::accuracy(pass.output(), &yb);
            let back = model.backward(cfg.loss, &yb);
            observer.on_batch(model, &pass);
            optimizer.step(cfg, model.params_mut());
            loss_sum += back.loss * idx.len() as f64;
            acc_sum += acc * idx.len() as f64;
            steps += 1;
        }
        let metrics = EpochMetrics {
            loss: loss_sum / data.len() as f64,
            accuracy: acc_sum / data.len() as f64,
            steps,
        };
        observer.on_epoch_end(epoch, model, &metrics);
        history.push(metrics);
    }
    Ok(history)
}
