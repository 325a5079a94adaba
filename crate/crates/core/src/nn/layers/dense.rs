use super::{init_tensor, ForwardCtx, Param, ParamRole};
use crate::nn::activation;
use crate::nn::spec::{Activation, Initializer};
use crate::nn::tensor::{gemm, Tensor};
use crate::rng::StreamRng;

/// Fully connected layer over the last axis, with a fused activation.
/// Used both as `Dense` and as `TimeDistributedDense` on `[N, T, D]` input.
#[derive(Debug, Clone)]
pub struct Dense {
    inputs: usize,
    units: usize,
    activation: Activation,
    params: [Param; 2],
    x: Option<Tensor>,
    y: Option<Tensor>,
}

impl Dense {
    pub fn new(
        inputs: usize,
        units: usize,
        activation: Activation,
        init: Initializer,
        rng: &mut StreamRng,
    ) -> Self {
        let w = init_tensor(init, &[inputs, units], inputs, units, rng);
        Dense {
            inputs,
            units,
            activation,
            params: [
                Param::new("kernel", ParamRole::Weight, w),
                Param::new("bias", ParamRole::Bias, Tensor::zeros(&[units])),
            ],
            x: None,
            y: None,
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Tensor {
        assert_eq!(x.last_dim(), self.inputs, "dense input width");
        let rows = x.len() / self.inputs;
        let mut out = vec![0.0; rows * self.units];
        let b = self.params[1].value.data();
        for row in out.chunks_mut(self.units) {
            row.copy_from_slice(b);
        }
        gemm(
            rows,
            self.inputs,
            self.units,
            x.data(),
            false,
            self.params[0].value.data(),
            false,
            &mut out,
            1.0,
        );
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = self.units;
        let mut y = Tensor::from_parts(shape, out);
        activation::apply(self.activation, &mut y);
        self.x = Some(x.clone());
        self.y = Some(y.clone());
        y
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let x = self.x.as_ref().expect("dense backward before forward");
        let y = self.y.as_ref().unwrap();
        let mut gz = grad.clone();
        activation::backward(self.activation, y, &mut gz);
        let rows = x.len() / self.inputs;
        let [w, b] = &mut self.params;
        gemm(
            self.inputs,
            rows,
            self.units,
            x.data(),
            true,
            gz.data(),
            false,
            w.grad.data_mut(),
            0.0,
        );
        b.grad.fill(0.0);
        for row in gz.data().chunks(self.units) {
            for (acc, v) in b.grad.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut dx = vec![0.0; rows * self.inputs];
        gemm(
            rows,
            self.units,
            self.inputs,
            gz.data(),
            false,
            w.value.data(),
            true,
            &mut dx,
            0.0,
        );
        Tensor::from_parts(x.shape().to_vec(), dx)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }
}

/// Standalone activation op.
#[derive(Debug, Clone)]
pub struct ActivationLayer {
    activation: Activation,
    y: Option<Tensor>,
}

impl ActivationLayer {
    pub fn new(activation: Activation) -> Self {
        ActivationLayer {
            activation,
            y: None,
        }
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Tensor {
        let mut y = x.clone();
        activation::apply(self.activation, &mut y);
        self.y = Some(y.clone());
        y
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut g = grad.clone();
        activation::backward(self.activation, self.y.as_ref().unwrap(), &mut g);
        g
    }

    pub fn params(&self) -> &[Param] {
        &[]
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut []
    }
}
