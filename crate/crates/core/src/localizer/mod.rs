//! Fault classifier: encodes a training trace and the model's graph tokens,
//! decodes a short sequence of root-cause classes.

pub mod checkpoint;
pub mod classifier;
pub mod metrics;
pub mod training;

use std::path::Path;

pub use classifier::{symlog, token_tensor, trace_tensor, Classifier, ClassifierSpec, InputShape};
pub use metrics::{confusion, decode_set, decode_steps, label_steps, score, Diagnosis, Scores};
pub use training::{evaluate, train_classifier, Batchable, EpochRecord, FitHistory, FitOptions, Sample};

use crate::error::Result;
use crate::graph::{encode_and_pad, export_graph, Vocab};
use crate::nn::ModelSpec;
use crate::probe::{FeatureMatrix, ProbeConfig};

/// A trained classifier with everything needed to featurize new models the
/// same way as its corpus.
#[derive(Debug, Clone)]
pub struct Localizer {
    pub classifier: Classifier,
    pub vocab: Vocab,
    pub max_layers: usize,
    pub probe: ProbeConfig,
}

impl Localizer {
    pub fn epochs(&self) -> usize {
        self.classifier.input_shape().epochs
    }

    pub fn seq_len(&self) -> usize {
        self.classifier.input_shape().seq_len
    }

    /// Diagnoses a trace and the graph of `spec`.
    pub fn diagnose(&self, features: &FeatureMatrix, spec: &ModelSpec) -> Result<Diagnosis> {
        let tokens = encode_and_pad(&export_graph(spec), &self.vocab, self.seq_len())?;
        self.classifier.predict(features, &tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        checkpoint::load(path)
    }
}
