use super::layers::{ForwardCtx, Layer, Param};
use super::loss;
use super::spec::{LossKind, ModelSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeedTree;

/// A built network: spec plus initialized layers.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    layers: Vec<Layer>,
    shapes: Vec<Vec<usize>>,
    dropout_seed: SeedTree,
    forward_calls: u64,
    output: Option<Tensor>,
}

/// Outputs of every layer for one batch; the last entry is the model output.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub activations: Vec<Tensor>,
}

impl ForwardPass {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("model has layers")
    }
}

#[derive(Debug, Clone)]
pub struct BackwardPass {
    pub loss: f64,
    /// Gradient of the loss w.r.t. each layer's output.
    pub activation_grads: Vec<Tensor>,
    pub input_grad: Tensor,
}

impl Model {
    /// Builds and initializes `spec`. Each layer draws its initial values from
    /// its own stream, so changing one layer leaves the others' values intact.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self> {
        if spec.layers.is_empty() {
            return Err(Error::InvalidSpec("model has no layers".into()));
        }
        if spec.input_shape.is_empty() || spec.input_shape.contains(&0) {
            return Err(Error::InvalidSpec(format!(
                "input shape {:?} must be non-empty with positive extents",
                spec.input_shape
            )));
        }
        let root = SeedTree::new(seed);
        let mut shape = spec.input_shape.clone();
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut shapes = Vec::with_capacity(spec.layers.len());
        for (index, ls) in spec.layers.iter().enumerate() {
            let mut rng = root.child("init").index(index as u64).rng();
            let (layer, out) = Layer::build(ls, &shape, &mut rng).map_err(|detail| Error::Shape {
                index,
                kind: ls.kind_name().to_string(),
                detail,
            })?;
            layers.push(layer);
            shapes.push(out.clone());
            shape = out;
        }
        Ok(Model {
            spec: spec.clone(),
            layers,
            shapes,
            dropout_seed: root.child("dropout"),
            forward_calls: 0,
            output: None,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Per-sample output shape of each layer.
    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.shape()[1..] != self.spec.input_shape[..] {
            return Err(Error::Shape {
                index: 0,
                kind: "input".into(),
                detail: format!(
                    "batch shape {:?} does not match input shape {:?}",
                    batch.shape(),
                    self.spec.input_shape
                ),
            });
        }
        if let Some(row) = (0..batch.rows()).find(|&i| !batch.row(i).iter().all(|v| v.is_finite())) {
            return Err(Error::NonFiniteInput { index: row });
        }
        Ok(())
    }

    /// Runs the network, returning every layer's output. Dropout is active
    /// only in training mode; each call draws a fresh mask stream.
    pub fn forward(&mut self, batch: &Tensor, training: bool) -> Result<ForwardPass> {
        let seed = self.dropout_seed.index(self.forward_calls);
        self.forward_calls += 1;
        self.forward_seeded(batch, training, seed)
    }

    /// Like [`Model::forward`] with an explicit dropout stream.
    pub fn forward_seeded(&mut self, batch: &Tensor, training: bool, seed: SeedTree) -> Result<ForwardPass> {
        self.check_batch(batch)?;
        let mut rng = seed.rng();
        let mut ctx = ForwardCtx {
            training,
            rng: &mut rng,
        };
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, &mut ctx);
            activations.push(x.clone());
        }
        self.output = Some(x);
        Ok(ForwardPass { activations })
    }

    /// Backpropagates `loss_kind` against `targets` through the most recent
    /// forward pass, leaving parameter gradients in each layer.
    pub fn backward(&mut self, loss_kind: LossKind, targets: &Tensor) -> BackwardPass {
        let output = self.output.as_ref().expect("backward requires a forward pass");
        assert_eq!(output.shape(), targets.shape(), "target shape");
        let loss = loss::loss_value(loss_kind, output, targets);
        let mut grad = loss::loss_grad(loss_kind, output, targets);
        let mut activation_grads = vec![Tensor::zeros(&[1]); self.layers.len()];
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            activation_grads[i] = grad.clone();
            grad = layer.backward(&grad);
        }
        BackwardPass {
            loss,
            activation_grads,
            input_grad: grad,
        }
    }

    /// Backpropagates a gradient w.r.t. the most recent output and returns
    /// the gradient w.r.t. the input.
    pub fn backward_from(&mut self, mut grad: Tensor) -> Tensor {
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad);
        }
        grad
    }

    /// Inference on a copy of the model; `self` is untouched.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let mut m = self.clone();
        let pass = m.forward_seeded(batch, false, self.dropout_seed)?;
        Ok(pass.activations.into_iter().last().unwrap())
    }

    /// Eval-mode loss and accuracy over a whole dataset.
    pub fn evaluate(&self, x: &Tensor, y: &Tensor, loss_kind: LossKind) -> Result<(f64, f64)> {
        let pred = self.predict(x)?;
        Ok((loss::loss_value(loss_kind, &pred, y), loss::accuracy(&pred, y)))
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.layers.iter().flat_map(|l| l.params().iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut().iter_mut())
    }

    /// All parameters then all buffers, flattened in layer order.
    pub fn state_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            for p in l.params() {
                out.extend_from_slice(p.value.data());
            }
            for b in l.buffers() {
                out.extend_from_slice(b.data());
            }
        }
        out
    }
}
