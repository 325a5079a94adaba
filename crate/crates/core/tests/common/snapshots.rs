use d4d::probe::{EpochSnapshot, LayerRecord, StatVector};

/// Layer record with every statistic set to `fill`.
pub fn layer(fill: f64) -> LayerRecord {
    let s = StatVector { mean: fill, min: fill, max: fill, median: fill, variance: fill, std: fill, sem: fill, skew: fill };
    LayerRecord {
        layer_index: 0,
        kind: "dense".into(),
        weights: s,
        gradients: s,
        biases: s,
        weight_norm: fill,
        grad_norm: fill,
        vanishing_gradient: fill,
        dead_node_frac: fill,
        saturation_frac: fill,
        tune_learning: fill,
    }
}

/// Snapshot of a `depth`-layer model with every value set to `fill`.
pub fn snapshot(epoch: usize, depth: usize, fill: f64) -> EpochSnapshot {
    EpochSnapshot {
        epoch,
        loss: fill,
        accuracy: fill,
        data_min: fill,
        data_max: fill,
        layers: (0..depth).map(|_| layer(fill)).collect(),
        non_finite_update: false,
    }
}
