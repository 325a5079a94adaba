use serde::{Deserialize, Serialize};

use super::stats::{
    dead_node_fraction, descriptive_stats, tensor_norm, tune_learning_ratio,
    vanishing_gradient_metric, StatVector,
};
use crate::error::Result;
use crate::nn::{
    train, Activation, Dataset, EpochMetrics, ForwardPass, Layer, Model, ParamRole, TrainConfig,
    TrainObserver,
};

/// Thresholds for the activation-based probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub dead_threshold: f64,
    pub sigmoid_saturation: (f64, f64),
    pub tanh_saturation: (f64, f64),
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            dead_threshold: 1e-3,
            sigmoid_saturation: (0.05, 0.95),
            tanh_saturation: (-0.95, 0.95),
        }
    }
}

impl ProbeConfig {
    fn saturation_bounds(&self, act: Option<Activation>) -> Option<(f64, f64)> {
        match act {
            Some(Activation::Sigmoid) => Some(self.sigmoid_saturation),
            Some(Activation::Tanh) => Some(self.tanh_saturation),
            _ => None,
        }
    }
}

/// Per-layer measurements for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer_index: usize,
    pub kind: String,
    pub weights: StatVector,
    pub gradients: StatVector,
    pub biases: StatVector,
    pub weight_norm: f64,
    pub grad_norm: f64,
    pub vanishing_gradient: f64,
    pub dead_node_frac: f64,
    pub saturation_frac: f64,
    pub tune_learning: f64,
}

impl LayerRecord {
    /// Column-name suffixes in [`LayerRecord::to_row`] order.
    pub fn column_names() -> Vec<String> {
        let mut names = Vec::with_capacity(30);
        for group in ["W", "G", "B"] {
            for stat in StatVector::NAMES {
                names.push(format!("{stat}_{group}"));
            }
        }
        names.extend(["N_W", "N_G", "VG", "DN", "SA", "TL"].map(String::from));
        names
    }

    pub fn to_row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(30);
        row.extend(self.weights.to_array());
        row.extend(self.gradients.to_array());
        row.extend(self.biases.to_array());
        row.extend([
            self.weight_norm,
            self.grad_norm,
            self.vanishing_gradient,
            self.dead_node_frac,
            self.saturation_frac,
            self.tune_learning,
        ]);
        row
    }
}

/// Everything recorded at the end of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSnapshot {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub data_min: f64,
    pub data_max: f64,
    pub layers: Vec<LayerRecord>,
    /// Set when any parameter became non-finite during the epoch.
    pub non_finite_update: bool,
}

/// Streaming per-unit activation summary over one epoch.
#[derive(Debug, Clone, Default)]
pub struct ActivationTracker {
    unit_max_abs: Vec<f64>,
    saturated: u64,
    seen: u64,
}

impl ActivationTracker {
    /// Folds a batch of layer outputs `[N, ...]` into the running summary.
    pub fn observe(&mut self, act: &crate::nn::Tensor, bounds: Option<(f64, f64)>) {
        let w = act.row_len();
        if self.unit_max_abs.len() != w {
            self.unit_max_abs = vec![0.0; w];
        }
        for row in act.data().chunks(w) {
            for (m, v) in self.unit_max_abs.iter_mut().zip(row) {
                *m = m.max(v.abs());
            }
        }
        if let Some((lo, hi)) = bounds {
            self.saturated += act.data().iter().filter(|&&v| v <= lo || v >= hi).count() as u64;
        }
        self.seen += act.len() as u64;
    }

    pub fn dead_fraction(&self, threshold: f64) -> f64 {
        dead_node_fraction(&self.unit_max_abs, threshold)
    }

    pub fn saturation_fraction(&self) -> f64 {
        if self.seen == 0 {
            0.0
        } else {
            self.saturated as f64 / self.seen as f64
        }
    }
}

/// Indices of the layers that get a feature slot: those with parameters.
pub fn instrumented_layers(model: &Model) -> Vec<usize> {
    model
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.has_params())
        .map(|(i, _)| i)
        .collect()
}

fn collect(layer: &Layer, role: ParamRole, grads: bool) -> Vec<f64> {
    layer
        .params()
        .iter()
        .filter(|p| p.role == role)
        .flat_map(|p| if grads { p.grad.data() } else { p.value.data() }.iter().copied())
        .collect()
}

fn stats_or_zero(values: &[f64]) -> StatVector {
    descriptive_stats(values).unwrap_or_default()
}

/// Builds the snapshot for one epoch from the model's end-of-epoch
/// parameters, the epoch-mean weight gradients of each instrumented layer,
/// its activation trackers, the epoch metrics and the training data range.
pub fn snapshot_epoch(
    epoch: usize,
    model: &Model,
    mean_grads: &[Vec<f64>],
    trackers: &[ActivationTracker],
    metrics: &EpochMetrics,
    data_range: (f64, f64),
    config: &ProbeConfig,
) -> EpochSnapshot {
    let layer_ids = instrumented_layers(model);
    let mut layers = Vec::with_capacity(layer_ids.len());
    for (slot, &li) in layer_ids.iter().enumerate() {
        let layer = &model.layers()[li];
        let w = collect(layer, ParamRole::Weight, false);
        let b = collect(layer, ParamRole::Bias, false);
        let g = &mean_grads[slot];
        let weight_norm = tensor_norm(&w);
        let grad_norm = tensor_norm(g);
        let tracker = &trackers[slot];
        layers.push(LayerRecord {
            layer_index: li,
            kind: layer.kind_name().to_string(),
            weights: stats_or_zero(&w),
            gradients: stats_or_zero(g),
            biases: stats_or_zero(&b),
            weight_norm,
            grad_norm,
            vanishing_gradient: vanishing_gradient_metric(g),
            dead_node_frac: tracker.dead_fraction(config.dead_threshold),
            saturation_frac: if config.saturation_bounds(layer.activation()).is_some() {
                tracker.saturation_fraction()
            } else {
                0.0
            },
            tune_learning: tune_learning_ratio(grad_norm, weight_norm),
        });
    }
    EpochSnapshot {
        epoch,
        loss: metrics.loss,
        accuracy: metrics.accuracy,
        data_min: data_range.0,
        data_max: data_range.1,
        layers,
        non_finite_update: model.params().any(|p| !p.value.all_finite()),
    }
}

/// Training observer that turns each epoch into an [`EpochSnapshot`] and
/// hands it to a hook.
pub struct Instrument<F: FnMut(EpochSnapshot)> {
    config: ProbeConfig,
    data_range: (f64, f64),
    layer_ids: Vec<usize>,
    grad_sums: Vec<Vec<f64>>,
    batches: usize,
    trackers: Vec<ActivationTracker>,
    hook: F,
}

impl<F: FnMut(EpochSnapshot)> Instrument<F> {
    pub fn new(model: &Model, data_range: (f64, f64), config: ProbeConfig, hook: F) -> Self {
        let layer_ids = instrumented_layers(model);
        let n = layer_ids.len();
        Instrument {
            config,
            data_range,
            layer_ids,
            grad_sums: vec![Vec::new(); n],
            batches: 0,
            trackers: vec![ActivationTracker::default(); n],
            hook,
        }
    }
}

impl<F: FnMut(EpochSnapshot)> TrainObserver for Instrument<F> {
    fn on_batch(&mut self, model: &Model, pass: &ForwardPass) {
        for (slot, &li) in self.layer_ids.iter().enumerate() {
            let layer = &model.layers()[li];
            let g = collect(layer, ParamRole::Weight, true);
            let sum = &mut self.grad_sums[slot];
            if sum.len() != g.len() {
                *sum = vec![0.0; g.len()];
            }
            sum.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
            let bounds = self.config.saturation_bounds(layer.activation());
            self.trackers[slot].observe(&pass.activations[li], bounds);
        }
        self.batches += 1;
    }

    fn on_epoch_end(&mut self, epoch: usize, model: &Model, metrics: &EpochMetrics) {
        let scale = 1.0 / self.batches.max(1) as f64;
        let mean_grads: Vec<Vec<f64>> = self
            .grad_sums
            .iter()
            .map(|s| s.iter().map(|v| v * scale).collect())
            .collect();
        let snap = snapshot_epoch(
            epoch,
            model,
            &mean_grads,
            &self.trackers,
            metrics,
            self.data_range,
            &self.config,
        );
        (self.hook)(snap);
        self.grad_sums.iter_mut().for_each(|s| s.fill(0.0));
        self.trackers.iter_mut().for_each(|t| *t = ActivationTracker::default());
        self.batches = 0;
    }
}

/// Result of an instrumented training run.
#[derive(Debug, Clone)]
pub struct InstrumentedRun {
    pub history: Vec<EpochMetrics>,
    pub snapshots: Vec<EpochSnapshot>,
}

/// Trains `model` on `data` and records one snapshot per epoch.
pub fn train_instrumented(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    config: ProbeConfig,
) -> Result<InstrumentedRun> {
    let mut snapshots = Vec::with_capacity(cfg.epochs);
    let range = data.range();
    let history = {
        let mut inst = Instrument::new(model, range, config, |s| snapshots.push(s));
        train(model, data, cfg, &mut inst)?
    };
    Ok(InstrumentedRun { history, snapshots })
}
