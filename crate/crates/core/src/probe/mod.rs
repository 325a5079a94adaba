//! Per-epoch training instrumentation and the fixed-shape feature matrix.

pub mod matrix;
pub mod snapshot;
pub mod stats;

pub use matrix::{assemble_feature_matrix, sanitize, FeatureMatrix};
pub use snapshot::{
    instrumented_layers, snapshot_epoch, train_instrumented, ActivationTracker, EpochSnapshot,
    Instrument, InstrumentedRun, LayerRecord, ProbeConfig,
};
pub use stats::{
    dead_node_fraction, descriptive_stats, saturation_fraction, tensor_norm, tune_learning_ratio,
    vanishing_gradient_metric, Moments, StatVector,
};
