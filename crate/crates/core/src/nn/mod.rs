//! Deterministic neural-network engine: layers with hand-written reverse-mode
//! gradients, losses, optimizers and a minibatch training loop.

pub mod activation;
pub mod data;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod spec;
pub mod tensor;
pub mod train;

pub use data::Dataset;
pub use layers::{Layer, Param, ParamRole};
pub use model::{BackwardPass, ForwardPass, Model};
pub use optim::Optimizer;
pub use spec::{
    Activation, Initializer, LayerSpec, LossKind, ModelConfig, ModelSpec, OptimizerKind, TrainConfig,
};
pub use tensor::Tensor;
pub use train::{train, EpochMetrics, TrainObserver};
