use super::{init_tensor, ForwardCtx, Param, ParamRole};
use crate::nn::activation;
use crate::nn::spec::{Activation, Initializer};
use crate::nn::tensor::{gemm, Tensor};
use crate::rng::StreamRng;

/// 2-D convolution over `[N, H, W, C]` input, stride 1, valid padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    input: [usize; 3],
    output: [usize; 3],
    kernel: [usize; 2],
    activation: Activation,
    params: [Param; 2],
    cols: Option<Vec<f64>>,
    y: Option<Tensor>,
}

impl Conv2d {
    pub fn new(
        input: [usize; 3],
        filters: usize,
        kernel: [usize; 2],
        activation: Activation,
        init: Initializer,
        rng: &mut StreamRng,
    ) -> Self {
        let [h, w, c] = input;
        let patch = kernel[0] * kernel[1];
        let weights = init_tensor(
            init,
            &[kernel[0], kernel[1], c, filters],
            patch * c,
            patch * filters,
            rng,
        );
        Conv2d {
            input,
            output: [h - kernel[0] + 1, w - kernel[1] + 1, filters],
            kernel,
            activation,
            params: [
                Param::new("kernel", ParamRole::Weight, weights),
                Param::new("bias", ParamRole::Bias, Tensor::zeros(&[filters])),
            ],
            cols: None,
            y: None,
        }
    }

    pub fn output_shape(&self) -> &[usize; 3] {
        &self.output
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn patch_len(&self) -> usize {
        self.kernel[0] * self.kernel[1] * self.input[2]
    }

    fn im2col(&self, x: &Tensor) -> Vec<f64> {
        let [h, w, c] = self.input;
        let [oh, ow, _] = self.output;
        let [kh, kw] = self.kernel;
        let n = x.rows();
        let mut cols = Vec::with_capacity(n * oh * ow * self.patch_len());
        let xd = x.data();
        for b in 0..n {
            let base = b * h * w * c;
            for oy in 0..oh {
                for ox in 0..ow {
                    for dy in 0..kh {
                        let start = base + ((oy + dy) * w + ox) * c;
                        cols.extend_from_slice(&xd[start..start + kw * c]);
                    }
                }
            }
        }
        cols
    }

    pub fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Tensor {
        assert_eq!(&x.shape()[1..], &self.input, "conv2d input shape");
        let n = x.rows();
        let [oh, ow, f] = self.output;
        let rows = n * oh * ow;
        let cols = self.im2col(x);
        let mut out = vec![0.0; rows * f];
        for row in out.chunks_mut(f) {
            row.copy_from_slice(self.params[1].value.data());
        }
        gemm(
            rows,
            self.patch_len(),
            f,
            &cols,
            false,
            self.params[0].value.data(),
            false,
            &mut out,
            1.0,
        );
        let mut y = Tensor::from_parts(vec![n, oh, ow, f], out);
        activation::apply(self.activation, &mut y);
        self.cols = Some(cols);
        self.y = Some(y.clone());
        y
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let cols = self.cols.as_ref().expect("conv2d backward before forward");
        let mut gz = grad.clone();
        activation::backward(self.activation, self.y.as_ref().unwrap(), &mut gz);
        let n = grad.rows();
        let [h, w, c] = self.input;
        let [oh, ow, f] = self.output;
        let [kh, kw] = self.kernel;
        let rows = n * oh * ow;
        let plen = self.patch_len();
        let [wk, b] = &mut self.params;
        gemm(plen, rows, f, cols, true, gz.data(), false, wk.grad.data_mut(), 0.0);
        b.grad.fill(0.0);
        for row in gz.data().chunks(f) {
            for (acc, v) in b.grad.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut dcols = vec![0.0; rows * plen];
        gemm(rows, f, plen, gz.data(), false, wk.value.data(), true, &mut dcols, 0.0);
        let mut dx = vec![0.0; n * h * w * c];
        let mut patches = dcols.chunks(plen);
        for bi in 0..n {
            let base = bi * h * w * c;
            for oy in 0..oh {
                for ox in 0..ow {
                    let patch = patches.next().unwrap();
                    for dy in 0..kh {
                        let start = base + ((oy + dy) * w + ox) * c;
                        let src = &patch[dy * kw * c..(dy + 1) * kw * c];
                        for (d, s) in dx[start..start + kw * c].iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
            }
        }
        Tensor::from_parts(vec![n, h, w, c], dx)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }
}

/// Non-overlapping max pooling (stride == pool), trailing rows/cols dropped.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    input: [usize; 3],
    output: [usize; 3],
    pool: usize,
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn new(input: [usize; 3], pool: usize) -> Self {
        MaxPool2d {
            input,
            output: [input[0] / pool, input[1] / pool, input[2]],
            pool,
            argmax: Vec::new(),
        }
    }

    pub fn output_shape(&self) -> &[usize; 3] {
        &self.output
    }

    pub fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Tensor {
        let [h, w, c] = self.input;
        let [oh, ow, _] = self.output;
        let n = x.rows();
        let xd = x.data();
        let mut out = Vec::with_capacity(n * oh * ow * c);
        self.argmax.clear();
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let mut best = usize::MAX;
                        for dy in 0..self.pool {
                            for dx in 0..self.pool {
                                let idx = ((b * h + oy * self.pool + dy) * w + ox * self.pool + dx)
                                    * c
                                    + ch;
                                // NaN wins so that it propagates
                                if best == usize::MAX || xd[idx] > xd[best] || xd[idx].is_nan() {
                                    best = idx;
                                }
                            }
                        }
                        self.argmax.push(best);
                        out.push(xd[best]);
                    }
                }
            }
        }
        Tensor::from_parts(vec![n, oh, ow, c], out)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let [h, w, c] = self.input;
        let n = grad.rows();
        let mut dx = vec![0.0; n * h * w * c];
        for (&idx, g) in self.argmax.iter().zip(grad.data()) {
            dx[idx] += g;
        }
        Tensor::from_parts(vec![n, h, w, c], dx)
    }

    pub fn params(&self) -> &[Param] {
        &[]
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut []
    }
}
