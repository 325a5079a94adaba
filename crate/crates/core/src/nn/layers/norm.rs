use rand::Rng;

use super::{ForwardCtx, Param, ParamRole};
use crate::nn::tensor::Tensor;

pub const BN_EPSILON: f64 = 1e-3;
pub const BN_MOMENTUM: f64 = 0.99;

/// Batch normalization over the last axis.
///
/// In training mode the batch statistics are used and the running averages
/// updated, unless the statistics have been frozen, in which case the stored
/// statistics are used in every mode.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    features: usize,
    params: [Param; 2],
    running_mean: Tensor,
    running_var: Tensor,
    frozen: bool,
    xhat: Option<Tensor>,
    inv_std: Vec<f64>,
    used_batch_stats: bool,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            features,
            params: [
                Param::new("gamma", ParamRole::Weight, Tensor::full(&[features], 1.0)),
                Param::new("beta", ParamRole::Bias, Tensor::zeros(&[features])),
            ],
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::full(&[features], 1.0),
            frozen: false,
            xhat: None,
            inv_std: Vec::new(),
            used_batch_stats: false,
        }
    }

    /// Fixes the normalization statistics; they are no longer updated.
    pub fn freeze_stats(&mut self, mean: Vec<f64>, var: Vec<f64>) {
        assert_eq!(mean.len(), self.features);
        assert_eq!(var.len(), self.features);
        self.running_mean = Tensor::from_parts(vec![self.features], mean);
        self.running_var = Tensor::from_parts(vec![self.features], var);
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Tensor {
        let d = self.features;
        assert_eq!(x.last_dim(), d, "batch norm width");
        let rows = x.len() / d;
        let use_batch = ctx.training && !self.frozen;
        let (mean, var) = if use_batch {
            let mut mean = vec![0.0; d];
            for r in x.data().chunks(d) {
                for (m, v) in mean.iter_mut().zip(r) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= rows as f64);
            let mut var = vec![0.0; d];
            for r in x.data().chunks(d) {
                for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s /= rows as f64);
            for j in 0..d {
                let rm = &mut self.running_mean.data_mut()[j];
                *rm = BN_MOMENTUM * *rm + (1.0 - BN_MOMENTUM) * mean[j];
                let rv = &mut self.running_var.data_mut()[j];
                *rv = BN_MOMENTUM * *rv + (1.0 - BN_MOMENTUM) * var[j];
            }
            (mean, var)
        } else {
            (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            )
        };
        self.inv_std = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
        let mut xhat = x.data().to_vec();
        for r in xhat.chunks_mut(d) {
            for ((v, m), s) in r.iter_mut().zip(&mean).zip(&self.inv_std) {
                *v = (*v - m) * s;
            }
        }
        let gamma = self.params[0].value.data();
        let beta = self.params[1].value.data();
        let mut y = xhat.clone();
        for r in y.chunks_mut(d) {
            for ((v, g), b) in r.iter_mut().zip(gamma).zip(beta) {
                *v = *v * g + b;
            }
        }
        self.xhat = Some(Tensor::from_parts(x.shape().to_vec(), xhat));
        self.used_batch_stats = use_batch;
        Tensor::from_parts(x.shape().to_vec(), y)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let d = self.features;
        let xhat = self.xhat.as_ref().expect("batch norm backward before forward");
        let rows = grad.len() / d;
        let [gamma, beta] = &mut self.params;
        gamma.grad.fill(0.0);
        beta.grad.fill(0.0);
        for (g, xh) in grad.data().chunks(d).zip(xhat.data().chunks(d)) {
            for j in 0..d {
                gamma.grad.data_mut()[j] += g[j] * xh[j];
                beta.grad.data_mut()[j] += g[j];
            }
        }
        let gv = gamma.value.data();
        let mut dx = vec![0.0; grad.len()];
        if self.used_batch_stats {
            let m = rows as f64;
            for (out, (g, xh)) in dx
                .chunks_mut(d)
                .zip(grad.data().chunks(d).zip(xhat.data().chunks(d)))
            {
                for j in 0..d {
                    let sum_dxhat = beta.grad.data()[j] * gv[j];
                    let sum_dxhat_xhat = gamma.grad.data()[j] * gv[j];
                    out[j] = self.inv_std[j] / m
                        * (m * g[j] * gv[j] - sum_dxhat - xh[j] * sum_dxhat_xhat);
                }
            }
        } else {
            for (out, g) in dx.chunks_mut(d).zip(grad.data().chunks(d)) {
                for j in 0..d {
                    out[j] = g[j] * gv[j] * self.inv_std[j];
                }
            }
        }
        Tensor::from_parts(grad.shape().to_vec(), dx)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn buffers(&self) -> Vec<&Tensor> {
        vec![&self.running_mean, &self.running_var]
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}

/// Inverted dropout; identity outside training mode.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        Dropout { rate, mask: None }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Tensor {
        if !ctx.training || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> = (0..x.len())
            .map(|_| {
                if ctx.rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.mask = Some(mask);
        Tensor::from_parts(x.shape().to_vec(), data)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        match &self.mask {
            None => grad.clone(),
            Some(mask) => {
                let data = grad.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                Tensor::from_parts(grad.shape().to_vec(), data)
            }
        }
    }

    pub fn params(&self) -> &[Param] {
        &[]
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut []
    }
}
