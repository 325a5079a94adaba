//! Declarative model and training descriptions.
//!
//! JSON layout:
//!
//! ```json
//! {"input_shape": [2],
//!  "layers": [{"kind": "dense", "units": 8, "activation": "relu", "init": "glorot_uniform"}],
//!  "train": {"loss": "mse", "optimizer": "sgd", "lr": 0.01, "batch_size": 32,
//!            "epochs": 40, "clip": null, "seed": 7}}
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
    Softmax,
    /// No activation op at all. Numerically identical to `Linear`, but
    /// exported without an activation node.
    #[default]
    None,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
            Activation::None => "none",
        }
    }

    /// True for activations that do not change their input.
    pub fn is_identity(self) -> bool {
        matches!(self, Activation::Linear | Activation::None)
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, Activation::Sigmoid | Activation::Tanh)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    #[default]
    GlorotUniform,
    HeUniform,
    Zeros,
    Normal {
        stddev: f64,
    },
}

impl fmt::Display for Initializer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Initializer::GlorotUniform => f.write_str("glorot_uniform"),
            Initializer::HeUniform => f.write_str("he_uniform"),
            Initializer::Zeros => f.write_str("zeros"),
            Initializer::Normal { stddev } => write!(f, "normal({stddev})"),
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        units: usize,
        #[serde(default)]
        activation: Activation,
        #[serde(default)]
        init: Initializer,
    },
    Conv2d {
        filters: usize,
        kernel: [usize; 2],
        #[serde(default)]
        activation: Activation,
        #[serde(default)]
        init: Initializer,
    },
    MaxPool2d {
        pool: usize,
    },
    Flatten,
    Dropout {
        rate: f64,
    },
    BatchNorm,
    Embedding {
        vocab: usize,
        dim: usize,
        #[serde(default)]
        init: Initializer,
    },
    Lstm {
        units: usize,
        #[serde(default = "default_true")]
        return_sequences: bool,
        #[serde(default)]
        init: Initializer,
    },
    Concatenate,
    RepeatVector {
        repeat: usize,
    },
    TimeDistributedDense {
        units: usize,
        #[serde(default)]
        activation: Activation,
        #[serde(default)]
        init: Initializer,
    },
    Activation {
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec::Dense {
            units,
            activation,
            init: Initializer::GlorotUniform,
        }
    }

    pub fn conv2d(filters: usize, kernel: usize, activation: Activation) -> Self {
        LayerSpec::Conv2d {
            filters,
            kernel: [kernel, kernel],
            activation,
            init: Initializer::GlorotUniform,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2d { .. } => "max_pool2d",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::BatchNorm => "batch_norm",
            LayerSpec::Embedding { .. } => "embedding",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Concatenate => "concatenate",
            LayerSpec::RepeatVector { .. } => "repeat_vector",
            LayerSpec::TimeDistributedDense { .. } => "time_distributed_dense",
            LayerSpec::Activation { .. } => "activation",
        }
    }

    /// The activation applied by this layer, if the layer carries one.
    pub fn activation(&self) -> Option<Activation> {
        match self {
            LayerSpec::Dense { activation, .. }
            | LayerSpec::Conv2d { activation, .. }
            | LayerSpec::TimeDistributedDense { activation, .. }
            | LayerSpec::Activation { activation } => Some(*activation),
            _ => None,
        }
    }

    pub fn activation_mut(&mut self) -> Option<&mut Activation> {
        match self {
            LayerSpec::Dense { activation, .. }
            | LayerSpec::Conv2d { activation, .. }
            | LayerSpec::TimeDistributedDense { activation, .. }
            | LayerSpec::Activation { activation } => Some(activation),
            _ => None,
        }
    }

    pub fn initializer(&self) -> Option<Initializer> {
        match self {
            LayerSpec::Dense { init, .. }
            | LayerSpec::Conv2d { init, .. }
            | LayerSpec::Embedding { init, .. }
            | LayerSpec::Lstm { init, .. }
            | LayerSpec::TimeDistributedDense { init, .. } => Some(*init),
            _ => None,
        }
    }

    pub fn initializer_mut(&mut self) -> Option<&mut Initializer> {
        match self {
            LayerSpec::Dense { init, .. }
            | LayerSpec::Conv2d { init, .. }
            | LayerSpec::Embedding { init, .. }
            | LayerSpec::Lstm { init, .. }
            | LayerSpec::TimeDistributedDense { init, .. } => Some(init),
            _ => None,
        }
    }

    /// Static parameter checks that do not depend on the input shape.
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            LayerSpec::Dense { units, .. }
            | LayerSpec::Lstm { units, .. }
            | LayerSpec::TimeDistributedDense { units, .. }
                if *units == 0 =>
            {
                Err("units must be >= 1".into())
            }
            LayerSpec::Conv2d { filters, kernel, .. } if *filters == 0 || kernel.contains(&0) => {
                Err("filters and kernel extents must be >= 1".into())
            }
            LayerSpec::MaxPool2d { pool } if *pool == 0 => Err("pool must be >= 1".into()),
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(rate) => {
                Err(format!("dropout rate {rate} outside [0, 1)"))
            }
            LayerSpec::Embedding { vocab, dim, .. } if *vocab == 0 || *dim == 0 => {
                Err("vocab and dim must be >= 1".into())
            }
            LayerSpec::RepeatVector { repeat } if *repeat == 0 => Err("repeat must be >= 1".into()),
            _ => Ok(()),
        }
    }
}

/// An ordered layer chain with its per-sample input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CategoricalCrossentropy,
    BinaryCrossentropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::CategoricalCrossentropy => "categorical_crossentropy",
            LossKind::BinaryCrossentropy => "binary_crossentropy",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Rmsprop,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rmsprop => "rmsprop",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_rho() -> f64 {
    0.9
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Clip-by-value bound applied to every gradient element before the update.
    #[serde(default)]
    pub clip: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

impl TrainConfig {
    pub fn new(loss: LossKind, optimizer: OptimizerKind, lr: f64, batch_size: usize, epochs: usize) -> Self {
        TrainConfig {
            loss,
            optimizer,
            lr,
            batch_size,
            epochs,
            clip: None,
            seed: 0,
            momentum: 0.0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            rho: default_rho(),
        }
    }

    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 || self.batch_size > dataset_len {
            return bad(format!(
                "batch_size {} must be in 1..={dataset_len}",
                self.batch_size
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if let Some(c) = self.clip {
            if c.is_nan() || c <= 0.0 {
                return bad(format!("clip {c} must be > 0"));
            }
        }
        Ok(())
    }
}

/// A model spec bundled with its training configuration; the on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub spec: ModelSpec,
    pub train: TrainConfig,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("model document", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model config serializes")
    }
}
