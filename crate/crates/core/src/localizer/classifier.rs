//! Two-encoder, sequence-decoder fault classifier.
//!
//! ```text
//! trace  [T, F] -> BatchNorm -> LSTM(h1, seq) -> LSTM(h2) --+
//!                                                           +-> Concat -> Dropout -> Flatten
//! tokens [S]    -> Embedding -> LSTM(h1, seq) -> LSTM(h2) --+      -> RepeatVector(K) -> LSTM(h3, seq)
//!                                                                  -> TD Dense(tanh) -> LSTM(h4, seq)
//!                                                                  -> TD Dense(softmax, classes)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TokenSequence;
use crate::mutator::NUM_CLASSES;
use crate::nn::layers::{concat_last, split_last};
use crate::nn::{Activation, Initializer, Layer, LayerSpec, Model, ModelSpec, Param, Tensor};
use crate::probe::FeatureMatrix;
use crate::rng::SeedTree;

use super::metrics::{decode_steps, Diagnosis};

/// Widths of the classifier. Defaults: all LSTMs 64 wide, embedding 32,
/// dropout 0.3, two decoder steps over 11 classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSpec {
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
    pub h4: usize,
    /// Width of the tanh time-distributed layer between the decoder LSTMs.
    pub dense_units: usize,
    pub embed_dim: usize,
    pub dropout: f64,
    pub steps: usize,
    pub classes: usize,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            h1: 64,
            h2: 64,
            h3: 64,
            h4: 64,
            dense_units: 64,
            embed_dim: 32,
            dropout: 0.3,
            steps: 2,
            classes: NUM_CLASSES,
        }
    }
}

/// Corpus-wide input geometry: trace rows and columns, token sequence
/// length and vocabulary size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub epochs: usize,
    pub features: usize,
    pub seq_len: usize,
    pub vocab_size: usize,
}

/// Signed log compression `sign(x)·ln(1+|x|)`, applied to trace features
/// before normalization so sentinel values and wide dynamic ranges do not
/// dominate the batch statistics.
pub fn symlog(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

/// Stacks feature matrices into a compressed `[N, T, F]` tensor.
pub fn trace_tensor(traces: &[&FeatureMatrix]) -> Tensor {
    let (t, f) = traces.first().map_or((1, 1), |m| m.shape());
    let mut data = Vec::with_capacity(traces.len() * t * f);
    for m in traces {
        data.extend(m.data().iter().map(|&v| symlog(v)));
    }
    Tensor::new(vec![traces.len(), t, f], data).expect("uniform trace shapes")
}

/// Stacks token sequences into an `[N, S]` id tensor.
pub fn token_tensor(tokens: &[&TokenSequence]) -> Tensor {
    let s = tokens.first().map_or(1, |t| t.len());
    let data = tokens.iter().flat_map(|t| t.ids.iter().map(|&i| i as f64)).collect();
    Tensor::new(vec![tokens.len(), s], data).expect("uniform token lengths")
}

#[derive(Debug, Clone)]
pub struct Classifier {
    spec: ClassifierSpec,
    input: InputShape,
    numeric: Model,
    tokens: Model,
    decoder: Model,
}

impl Classifier {
    pub fn build(spec: ClassifierSpec, input: InputShape, seed: u64) -> Result<Self> {
        if spec.steps == 0 || spec.classes < 2 {
            return Err(Error::InvalidSpec("classifier needs >= 1 step and >= 2 classes".into()));
        }
        let init = Initializer::GlorotUniform;
        let lstm = |units, seq| LayerSpec::Lstm { units, return_sequences: seq, init };
        let root = SeedTree::new(seed);
        let numeric_spec = ModelSpec {
            input_shape: vec![input.epochs, input.features],
            layers: vec![LayerSpec::BatchNorm, lstm(spec.h1, true), lstm(spec.h2, false)],
        };
        let token_spec = ModelSpec {
            input_shape: vec![input.seq_len],
            layers: vec![
                LayerSpec::Embedding { vocab: input.vocab_size, dim: spec.embed_dim, init },
                lstm(spec.h1, true),
                lstm(spec.h2, false),
            ],
        };
        let decoder_spec = ModelSpec {
            input_shape: vec![2 * spec.h2],
            layers: vec![
                LayerSpec::Dropout { rate: spec.dropout },
                LayerSpec::Flatten,
                LayerSpec::RepeatVector { repeat: spec.steps },
                lstm(spec.h3, true),
                LayerSpec::TimeDistributedDense { units: spec.dense_units, activation: Activation::Tanh, init },
                lstm(spec.h4, true),
                LayerSpec::TimeDistributedDense { units: spec.classes, activation: Activation::Softmax, init },
            ],
        };
        let mut numeric = Model::build(&numeric_spec, root.child("numeric").seed())?;
        let tokens = Model::build(&token_spec, root.child("tokens").seed())?;
        let decoder = Model::build(&decoder_spec, root.child("decoder").seed())?;
        if let Layer::BatchNorm(bn) = &mut numeric.layers_mut()[0] {
            bn.freeze_stats(vec![0.0; input.features], vec![1.0; input.features]);
        }
        Ok(Classifier { spec, input, numeric, tokens, decoder })
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> &InputShape {
        &self.input
    }

    /// Layers across both encoders, the fusion step and the decoder.
    pub fn layer_count(&self) -> usize {
        self.numeric.layers().len() + self.tokens.layers().len() + 1 + self.decoder.layers().len()
    }

    /// Freezes the trace normalization to the given per-feature statistics.
    pub fn set_normalization(&mut self, mean: Vec<f64>, var: Vec<f64>) {
        if let Layer::BatchNorm(bn) = &mut self.numeric.layers_mut()[0] {
            bn.freeze_stats(mean, var);
        }
    }

    /// Returns `[N, K, classes]` step distributions. With `dropout` set the
    /// decoder's dropout mask comes from that stream.
    pub fn forward(&mut self, traces: &Tensor, tokens: &Tensor, training: bool, dropout: Option<SeedTree>) -> Result<Tensor> {
        let a = self.numeric.forward(traces, training)?;
        let b = self.tokens.forward(tokens, training)?;
        let fused = concat_last(a.output(), b.output());
        let out = match dropout {
            Some(seed) => self.decoder.forward_seeded(&fused, training, seed)?,
            None => self.decoder.forward(&fused, training)?,
        };
        Ok(out.output().clone())
    }

    /// Backpropagates a gradient w.r.t. the last forward output.
    pub fn backward(&mut self, grad: Tensor) {
        let fused = self.decoder.backward_from(grad);
        let (ga, gb) = split_last(&fused, self.spec.h2);
        self.numeric.backward_from(ga);
        self.tokens.backward_from(gb);
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.numeric.params().chain(self.tokens.params()).chain(self.decoder.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.numeric
            .params_mut()
            .chain(self.tokens.params_mut())
            .chain(self.decoder.params_mut())
    }

    /// Parameters then buffers of each sub-network, flattened.
    pub fn state_vector(&self) -> Vec<f64> {
        let mut v = self.numeric.state_vector();
        v.extend(self.tokens.state_vector());
        v.extend(self.decoder.state_vector());
        v
    }

    /// Inverse of [`Classifier::state_vector`]. Restored normalization
    /// statistics stay frozen.
    pub fn load_state_vector(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.state_vector().len();
        if values.len() != expected {
            return Err(Error::IncompatibleCheckpoint(format!(
                "parameter block holds {} values, classifier needs {expected}",
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for model in [&mut self.numeric, &mut self.tokens, &mut self.decoder] {
            for layer in model.layers_mut() {
                for p in layer.params_mut() {
                    p.value.data_mut().iter_mut().for_each(|v| *v = it.next().unwrap());
                }
                for b in layer.buffers_mut() {
                    b.data_mut().iter_mut().for_each(|v| *v = it.next().unwrap());
                }
            }
        }
        let (mean, var) = match &self.numeric.layers()[0] {
            Layer::BatchNorm(bn) => {
                let bufs = bn.buffers();
                (bufs[0].data().to_vec(), bufs[1].data().to_vec())
            }
            _ => unreachable!("numeric branch starts with batch norm"),
        };
        self.set_normalization(mean, var);
        Ok(())
    }

    /// Inference on copies of the sub-networks: `[N, K, classes]`.
    pub fn predict_batch(&self, traces: &Tensor, tokens: &Tensor) -> Result<Tensor> {
        let a = self.numeric.predict(traces)?;
        let b = self.tokens.predict(tokens)?;
        self.decoder.predict(&concat_last(&a, &b))
    }

    fn check_inputs(&self, fm: &FeatureMatrix, ts: &TokenSequence) -> Result<()> {
        if fm.shape() != (self.input.epochs, self.input.features) || ts.len() != self.input.seq_len {
            return Err(Error::IncompatibleCheckpoint(format!(
                "input trace {:?} / {} tokens do not match the classifier's [{}, {}] / {}",
                fm.shape(),
                ts.len(),
                self.input.epochs,
                self.input.features,
                self.input.seq_len
            )));
        }
        Ok(())
    }

    pub fn predict(&self, fm: &FeatureMatrix, ts: &TokenSequence) -> Result<Diagnosis> {
        self.check_inputs(fm, ts)?;
        let out = self.predict_batch(&trace_tensor(&[fm]), &token_tensor(&[ts]))?;
        Ok(Diagnosis::from_steps(out.data().chunks(self.spec.classes).map(<[f64]>::to_vec).collect()))
    }

    /// Decoded step labels for a batch of prepared inputs.
    pub fn predict_steps(&self, traces: &Tensor, tokens: &Tensor) -> Result<Vec<Vec<u8>>> {
        let out = self.predict_batch(traces, tokens)?;
        Ok(decode_steps(&out, self.spec.steps))
    }
}
