//! Layer implementations. Every layer caches what its backward pass needs
//! during `forward`, and `backward` overwrites the parameter gradients.

mod conv;
mod dense;
mod norm;
mod recurrent;
mod shape;

pub use conv::{Conv2d, MaxPool2d};
pub use dense::{ActivationLayer, Dense};
pub use norm::{BatchNorm, Dropout};
pub use recurrent::{Embedding, Lstm};
pub use shape::{concat_last, split_last, Flatten, RepeatVector};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::spec::{Activation, Initializer, LayerSpec};
use super::tensor::Tensor;
use crate::rng::StreamRng;

/// Whether a parameter counts as a weight or a bias for instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: &'static str,
    pub role: ParamRole,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub(crate) fn new(name: &'static str, role: ParamRole, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            name,
            role,
            value,
            grad,
        }
    }
}

pub struct ForwardCtx<'a> {
    pub training: bool,
    pub rng: &'a mut StreamRng,
}

pub(crate) fn init_tensor(
    init: Initializer,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut StreamRng,
) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = match init {
        Initializer::Zeros => vec![0.0; n],
        Initializer::GlorotUniform => {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.random_range(-limit..limit)).collect()
        }
        Initializer::HeUniform => {
            let limit = (6.0 / fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-limit..limit)).collect()
        }
        Initializer::Normal { stddev } => {
            let dist = Normal::new(0.0, stddev.abs()).expect("finite stddev");
            (0..n).map(|_| dist.sample(rng)).collect()
        }
    };
    Tensor::from_parts(shape.to_vec(), data)
}

/// A built layer.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    MaxPool2d(MaxPool2d),
    Flatten(Flatten),
    Dropout(Dropout),
    BatchNorm(BatchNorm),
    Embedding(Embedding),
    Lstm(Lstm),
    RepeatVector(RepeatVector),
    TimeDistributedDense(Dense),
    Activation(ActivationLayer),
}

macro_rules! dispatch {
    ($self:expr, $l:ident => $body:expr) => {
        match $self {
            Layer::Dense($l) => $body,
            Layer::Conv2d($l) => $body,
            Layer::MaxPool2d($l) => $body,
            Layer::Flatten($l) => $body,
            Layer::Dropout($l) => $body,
            Layer::BatchNorm($l) => $body,
            Layer::Embedding($l) => $body,
            Layer::Lstm($l) => $body,
            Layer::RepeatVector($l) => $body,
            Layer::TimeDistributedDense($l) => $body,
            Layer::Activation($l) => $body,
        }
    };
}

impl Layer {
    /// Builds a layer for a per-sample input shape, returning it with its
    /// per-sample output shape.
    pub fn build(
        spec: &LayerSpec,
        input: &[usize],
        rng: &mut StreamRng,
    ) -> Result<(Layer, Vec<usize>), String> {
        spec.validate()?;
        let need_rank = |r: usize| -> Result<(), String> {
            if input.len() == r {
                Ok(())
            } else {
                Err(format!("expects rank-{r} input, got shape {input:?}"))
            }
        };
        let layer = match *spec {
            LayerSpec::Dense {
                units,
                activation,
                init,
            } => Layer::Dense(Dense::new(*input.last().unwrap(), units, activation, init, rng)),
            LayerSpec::TimeDistributedDense {
                units,
                activation,
                init,
            } => {
                need_rank(2)?;
                Layer::TimeDistributedDense(Dense::new(input[1], units, activation, init, rng))
            }
            LayerSpec::Conv2d {
                filters,
                kernel,
                activation,
                init,
            } => {
                need_rank(3)?;
                if kernel[0] > input[0] || kernel[1] > input[1] {
                    return Err(format!("kernel {kernel:?} larger than input {input:?}"));
                }
                Layer::Conv2d(Conv2d::new(
                    [input[0], input[1], input[2]],
                    filters,
                    kernel,
                    activation,
                    init,
                    rng,
                ))
            }
            LayerSpec::MaxPool2d { pool } => {
                need_rank(3)?;
                if pool > input[0] || pool > input[1] {
                    return Err(format!("pool {pool} larger than input {input:?}"));
                }
                Layer::MaxPool2d(MaxPool2d::new([input[0], input[1], input[2]], pool))
            }
            LayerSpec::Flatten => Layer::Flatten(Flatten::new(input)),
            LayerSpec::Dropout { rate } => Layer::Dropout(Dropout::new(rate)),
            LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(*input.last().unwrap())),
            LayerSpec::Embedding { vocab, dim, init } => {
                need_rank(1)?;
                Layer::Embedding(Embedding::new(vocab, dim, init, rng))
            }
            LayerSpec::Lstm {
                units,
                return_sequences,
                init,
            } => {
                need_rank(2)?;
                Layer::Lstm(Lstm::new(input[1], units, return_sequences, init, rng))
            }
            LayerSpec::RepeatVector { repeat } => {
                need_rank(1)?;
                Layer::RepeatVector(RepeatVector::new(repeat))
            }
            LayerSpec::Activation { activation } => {
                Layer::Activation(ActivationLayer::new(activation))
            }
            LayerSpec::Concatenate => {
                return Err("concatenate needs two inputs and cannot appear in a sequential chain".into())
            }
        };
        let out = layer.output_shape(input);
        Ok((layer, out))
    }

    pub fn output_shape(&self, input: &[usize]) -> Vec<usize> {
        let mut out = input.to_vec();
        match self {
            Layer::Dense(d) | Layer::TimeDistributedDense(d) => *out.last_mut().unwrap() = d.units(),
            Layer::Conv2d(c) => out = c.output_shape().to_vec(),
            Layer::MaxPool2d(p) => out = p.output_shape().to_vec(),
            Layer::Flatten(_) => out = vec![input.iter().product()],
            Layer::Embedding(e) => out.push(e.dim()),
            Layer::Lstm(l) => {
                out = if l.return_sequences() {
                    vec![input[0], l.units()]
                } else {
                    vec![l.units()]
                }
            }
            Layer::RepeatVector(r) => out.insert(0, r.repeat()),
            Layer::Dropout(_) | Layer::BatchNorm(_) | Layer::Activation(_) => {}
        }
        out
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::MaxPool2d(_) => "max_pool2d",
            Layer::Flatten(_) => "flatten",
            Layer::Dropout(_) => "dropout",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Embedding(_) => "embedding",
            Layer::Lstm(_) => "lstm",
            Layer::RepeatVector(_) => "repeat_vector",
            Layer::TimeDistributedDense(_) => "time_distributed_dense",
            Layer::Activation(_) => "activation",
        }
    }

    pub fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Tensor {
        dispatch!(self, l => l.forward(x, ctx))
    }

    /// Takes the gradient w.r.t. this layer's output, stores parameter
    /// gradients and returns the gradient w.r.t. its input.
    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        dispatch!(self, l => l.backward(grad))
    }

    pub fn params(&self) -> &[Param] {
        dispatch!(self, l => l.params())
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        dispatch!(self, l => l.params_mut())
    }

    /// Non-trainable state that must persist with the parameters.
    pub fn buffers(&self) -> Vec<&Tensor> {
        match self {
            Layer::BatchNorm(b) => b.buffers(),
            _ => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::BatchNorm(b) => b.buffers_mut(),
            _ => Vec::new(),
        }
    }

    pub fn activation(&self) -> Option<Activation> {
        match self {
            Layer::Dense(d) | Layer::TimeDistributedDense(d) => Some(d.activation()),
            Layer::Conv2d(c) => Some(c.activation()),
            Layer::Activation(a) => Some(a.activation()),
            _ => None,
        }
    }

    pub fn has_params(&self) -> bool {
        !self.params().is_empty()
    }
}
