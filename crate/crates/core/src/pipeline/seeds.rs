//! Bundled correct seed models, each paired with the task it solves.

use serde::{Deserialize, Serialize};

use super::tasks::TaskSpec;
use crate::error::{Error, Result};
use crate::mutator::OperatorGrid;
use crate::nn::{Activation, Initializer, LayerSpec, LossKind, ModelConfig, ModelSpec, OptimizerKind, TrainConfig};

/// A correct model, its task and an optional grid that replaces the
/// experiment-wide grid for this seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedModel {
    pub id: String,
    pub task: TaskSpec,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<OperatorGrid>,
}

/// Seeds are given either by bundled name or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedRef {
    Named(String),
    Inline(Box<SeedModel>),
}

impl SeedRef {
    /// Resolves the reference; bundled seeds train for `epochs` epochs.
    pub fn resolve(&self, epochs: usize) -> Result<SeedModel> {
        match self {
            SeedRef::Named(name) => bundled(name, epochs)
                .ok_or_else(|| Error::Config(format!("unknown bundled seed model '{name}'; known: {}", BUNDLED.join(", ")))),
            SeedRef::Inline(s) => Ok((**s).clone()),
        }
    }
}

pub const BUNDLED: [&str; 9] = [
    "blobs_softmax",
    "moons_sgd",
    "moons_rmsprop",
    "digits_softmax",
    "digits_linear",
    "digits_mlp",
    "digits_tanh",
    "digits_wide",
    "digits_cnn",
];

fn cfg(loss: LossKind, optimizer: OptimizerKind, lr: f64, batch: usize, epochs: usize) -> TrainConfig {
    TrainConfig::new(loss, optimizer, lr, batch, epochs)
}

/// Looks up a bundled seed model.
pub fn bundled(name: &str, epochs: usize) -> Option<SeedModel> {
    use Activation::*;
    use LossKind::*;
    use OptimizerKind::*;
    let dense = LayerSpec::dense;
    let (task, layers, train) = match name {
        "blobs_softmax" => (
            TaskSpec::Blobs { samples: 600, classes: 4, spread: 1.2 },
            vec![dense(16, Relu), dense(4, Softmax)],
            cfg(CategoricalCrossentropy, Adam, 0.01, 32, epochs),
        ),
        "moons_sgd" => (
            TaskSpec::Moons { samples: 600, noise: 0.2 },
            vec![dense(16, Tanh), dense(16, Relu), LayerSpec::Dropout { rate: 0.2 }, dense(2, Softmax)],
            TrainConfig { momentum: 0.9, ..cfg(CategoricalCrossentropy, Sgd, 0.05, 32, epochs) },
        ),
        "digits_mlp" => (
            TaskSpec::Digits { samples: 800, noise: 0.25, flat: true },
            vec![dense(32, Relu), LayerSpec::Dropout { rate: 0.3 }, dense(10, Softmax)],
            cfg(CategoricalCrossentropy, Rmsprop, 0.002, 32, epochs),
        ),
        "digits_cnn" => (
            TaskSpec::Digits { samples: 800, noise: 0.25, flat: false },
            vec![
                LayerSpec::conv2d(8, 3, Relu),
                LayerSpec::MaxPool2d { pool: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dropout { rate: 0.25 },
                dense(10, Softmax),
            ],
            cfg(CategoricalCrossentropy, Adam, 0.005, 32, epochs),
        ),
        // Softmax regression with a wide initialization, trained with
        // cross-entropy and Adam.
        "digits_softmax" => (
            TaskSpec::Digits { samples: 800, noise: 0.25, flat: true },
            vec![LayerSpec::Dense { units: 10, activation: Softmax, init: Initializer::Normal { stddev: 1.0 } }],
            cfg(CategoricalCrossentropy, Adam, 0.03, 32, epochs),
        ),
        // Linear hidden layers, so activations can be added.
        "digits_linear" => (
            TaskSpec::Digits { samples: 800, noise: 0.25, flat: true },
            vec![dense(32, Linear), dense(16, None), dense(10, Softmax)],
            cfg(CategoricalCrossentropy, Sgd, 0.05, 32, epochs),
        ),
        "digits_tanh" => (
            TaskSpec::Digits { samples: 800, noise: 0.3, flat: true },
            vec![dense(32, Tanh), LayerSpec::Dropout { rate: 0.2 }, dense(10, Softmax)],
            TrainConfig { momentum: 0.9, ..cfg(CategoricalCrossentropy, Sgd, 0.02, 32, epochs) },
        ),
        "digits_wide" => (
            TaskSpec::Digits { samples: 800, noise: 0.25, flat: true },
            vec![dense(64, Relu), dense(32, Sigmoid), dense(10, Softmax)],
            cfg(CategoricalCrossentropy, Adam, 0.003, 64, epochs),
        ),
        "moons_rmsprop" => (
            TaskSpec::Moons { samples: 600, noise: 0.15 },
            vec![dense(24, Sigmoid), dense(2, Softmax)],
            cfg(CategoricalCrossentropy, Rmsprop, 0.01, 16, epochs),
        ),
        _ => return Option::None,
    };
    Some(SeedModel {
        id: name.to_string(),
        model: ModelConfig { spec: ModelSpec { input_shape: task.input_shape(), layers }, train },
        task,
        grid: Option::None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Model;

    #[test]
    fn bundled_seeds_build() {
        for name in BUNDLED {
            let s = bundled(name, 5).unwrap();
            let m = Model::build(&s.model.spec, 0).unwrap();
            assert_eq!(m.output_shape(), &[s.task.classes()]);
        }
        assert!(bundled("nope", 5).is_none());
    }

    #[test]
    fn refs_parse_from_names_and_objects() {
        let r: SeedRef = serde_json::from_str(r#""blobs_softmax""#).unwrap();
        assert_eq!(r.resolve(3).unwrap().model.train.epochs, 3);
        assert!(SeedRef::Named("x".into()).resolve(3).is_err());
    }
}
