//! Fitting the classifier on corpus records.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::classifier::{token_tensor, trace_tensor, Classifier, ClassifierSpec, InputShape};
use super::metrics::{decode_steps, label_steps, score, step_targets, Scores};
use crate::error::{Error, Result};
use crate::graph::TokenSequence;
use crate::nn::loss::{loss_grad, loss_value};
use crate::nn::{LossKind, Optimizer, OptimizerKind, Tensor, TrainConfig};
use crate::probe::FeatureMatrix;
use crate::rng::SeedTree;

/// One corpus record as the classifier sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureMatrix,
    pub tokens: TokenSequence,
    /// Sorted fault labels; `[0]` for a correct model.
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Keep the parameters of the epoch with the best validation accuracy
    /// instead of the last epoch.
    pub keep_best: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { epochs: 40, batch_size: 16, lr: 1e-3, keep_best: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train: Scores,
    pub val: Option<Scores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters the returned classifier holds.
    pub selected_epoch: usize,
}

/// Inputs and step targets of a record set, prepared once.
pub struct Batchable {
    pub traces: Tensor,
    pub tokens: Tensor,
    pub steps: Vec<Vec<u8>>,
}

impl Batchable {
    pub fn new(samples: &[Sample], steps: usize) -> Result<Self> {
        let fms: Vec<&FeatureMatrix> = samples.iter().map(|s| &s.features).collect();
        let tss: Vec<&TokenSequence> = samples.iter().map(|s| &s.tokens).collect();
        let steps = samples.iter().map(|s| label_steps(&s.labels, steps)).collect::<Result<_>>()?;
        Ok(Batchable { traces: trace_tensor(&fms), tokens: token_tensor(&tss), steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn rows(&self, idx: &[usize]) -> (Tensor, Tensor, Vec<Vec<u8>>) {
        (
            self.traces.gather_rows(idx),
            self.tokens.gather_rows(idx),
            idx.iter().map(|&i| self.steps[i].clone()).collect(),
        )
    }
}

/// Per-feature mean and variance of the compressed traces over every
/// (record, epoch) row.
pub fn feature_stats(traces: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let f = traces.last_dim();
    let rows = (traces.len() / f).max(1) as f64;
    let mut mean = vec![0.0; f];
    for r in traces.data().chunks(f) {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= rows);
    let mut var = vec![0.0; f];
    for r in traces.data().chunks(f) {
        var.iter_mut().zip(r).zip(&mean).for_each(|((s, v), m)| *s += (v - m) * (v - m));
    }
    var.iter_mut().for_each(|s| *s /= rows);
    (mean, var)
}

/// Scores of the classifier on a prepared record set.
pub fn evaluate(classifier: &Classifier, data: &Batchable) -> Result<Scores> {
    let pred = classifier.predict_steps(&data.traces, &data.tokens)?;
    score(&pred, &data.steps)
}

/// Trains a fresh classifier with Adam on categorical cross-entropy
/// averaged over the decoder steps. Validation scores are computed on `val`
/// only; with `keep_best` the epoch with the highest validation accuracy is
/// returned.
pub fn train_classifier(
    spec: ClassifierSpec,
    input: InputShape,
    train: &[Sample],
    val: &[Sample],
    options: &FitOptions,
    seed: u64,
) -> Result<(Classifier, FitHistory)> {
    if train.is_empty() {
        return Err(Error::Empty("classifier training set"));
    }
    if options.epochs == 0 || options.batch_size == 0 {
        return Err(Error::Config("classifier epochs and batch size must be positive".into()));
    }
    let root = SeedTree::new(seed);
    let train_set = Batchable::new(train, spec.steps)?;
    let val_set = if val.is_empty() { None } else { Some(Batchable::new(val, spec.steps)?) };
    let first = &train_set.steps[0];
    if train_set.steps.iter().all(|s| s == first) {
        log::warn!("classifier training set holds a single label sequence {first:?}");
    }

    let mut clf = Classifier::build(spec, input, root.child("init").seed())?;
    let (mean, var) = feature_stats(&train_set.traces);
    clf.set_normalization(mean, var);

    let mut cfg = TrainConfig::new(LossKind::CategoricalCrossentropy, OptimizerKind::Adam, options.lr, options.batch_size, options.epochs);
    cfg.seed = seed;
    let mut optimizer = Optimizer::new(OptimizerKind::Adam);
    let shuffle = root.child("shuffle");
    let dropout = root.child("dropout");
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(options.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut batch_no = 0u64;

    for epoch in 0..options.epochs {
        order.sort_unstable();
        order.shuffle(&mut shuffle.index(epoch as u64).rng());
        let mut loss_sum = 0.0;
        let mut train_pred = vec![Vec::new(); train_set.len()];
        for idx in order.chunks(options.batch_size) {
            let (xt, xs, steps) = train_set.rows(idx);
            let target = step_targets(&steps, spec.classes);
            let out = clf.forward(&xt, &xs, true, Some(dropout.index(batch_no)))?;
            batch_no += 1;
            loss_sum += loss_value(LossKind::CategoricalCrossentropy, &out, &target) * idx.len() as f64;
            for (&i, p) in idx.iter().zip(decode_steps(&out, spec.steps)) {
                train_pred[i] = p;
            }
            clf.backward(loss_grad(LossKind::CategoricalCrossentropy, &out, &target));
            optimizer.step(&cfg, clf.params_mut());
        }
        let record = EpochRecord {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            train: score(&train_pred, &train_set.steps)?,
            val: val_set.as_ref().map(|v| evaluate(&clf, v)).transpose()?,
        };
        log::debug!("classifier epoch {epoch}: loss {:.4}, train acc {:.3}, val {:?}", record.loss, record.train.accuracy, record.val.map(|v| v.accuracy));
        if options.keep_best {
            if let Some(v) = record.val {
                if best.as_ref().is_none_or(|(acc, _, _)| v.accuracy > *acc) {
                    best = Some((v.accuracy, epoch, clf.state_vector()));
                }
            }
        }
        records.push(record);
    }

    let selected_epoch = match best {
        Some((_, epoch, state)) => {
            clf.load_state_vector(&state)?;
            epoch
        }
        None => options.epochs - 1,
    };
    Ok((clf, FitHistory { epochs: records, selected_epoch }))
}
