use super::{init_tensor, ForwardCtx, Param, ParamRole};
use crate::nn::activation::sigmoid;
use crate::nn::spec::Initializer;
use crate::nn::tensor::{gemm, Tensor};
use crate::rng::StreamRng;

/// Token embedding: `[N, S]` integer ids (stored as floats) to `[N, S, dim]`.
/// Ids outside the table map to 1, the out-of-vocabulary slot.
#[derive(Debug, Clone)]
pub struct Embedding {
    vocab: usize,
    dim: usize,
    params: [Param; 1],
    ids: Vec<usize>,
}

impl Embedding {
    pub fn new(vocab: usize, dim: usize, init: Initializer, rng: &mut StreamRng) -> Self {
        let table = init_tensor(init, &[vocab, dim], vocab, dim, rng);
        Embedding {
            vocab,
            dim,
            params: [Param::new("embeddings", ParamRole::Weight, table)],
            ids: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(&self, v: f64) -> usize {
        let oov = 1.min(self.vocab - 1);
        if v.is_finite() && v >= 0.0 && (v as usize) < self.vocab {
            v as usize
        } else {
            oov
        }
    }

    pub fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Tensor {
        self.ids = x.data().iter().map(|&v| self.index(v)).collect();
        let table = self.params[0].value.data();
        let mut data = Vec::with_capacity(self.ids.len() * self.dim);
        for &id in &self.ids {
            data.extend_from_slice(&table[id * self.dim..(id + 1) * self.dim]);
        }
        let mut shape = x.shape().to_vec();
        shape.push(self.dim);
        Tensor::from_parts(shape, data)
    }

    /// Ids are not differentiable; the returned input gradient is zero.
    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let d = self.dim;
        let g = &mut self.params[0].grad;
        g.fill(0.0);
        for (&id, row) in self.ids.iter().zip(grad.data().chunks(d)) {
            for (acc, v) in g.data_mut()[id * d..(id + 1) * d].iter_mut().zip(row) {
                *acc += v;
            }
        }
        let shape = &grad.shape()[..grad.shape().len() - 1];
        Tensor::zeros(shape)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }
}

/// LSTM over `[N, T, D]` with gate order (input, forget, cell, output),
/// sigmoid recurrent activation and tanh cell activation.
#[derive(Debug, Clone)]
pub struct Lstm {
    inputs: usize,
    units: usize,
    return_sequences: bool,
    params: [Param; 3],
    cache: Option<LstmCache>,
}

#[derive(Debug, Clone)]
struct LstmCache {
    x: Tensor,
    n: usize,
    t: usize,
    /// Post-activation gates, time-major `[T][N, 4H]`.
    gates: Vec<f64>,
    /// Cell states, time-major `[T][N, H]`.
    c: Vec<f64>,
    /// Hidden states, time-major `[T][N, H]`.
    h: Vec<f64>,
}

impl Lstm {
    pub fn new(
        inputs: usize,
        units: usize,
        return_sequences: bool,
        init: Initializer,
        rng: &mut StreamRng,
    ) -> Self {
        let g = 4 * units;
        let kernel = init_tensor(init, &[inputs, g], inputs, g, rng);
        let recurrent = init_tensor(init, &[units, g], units, g, rng);
        let mut bias = Tensor::zeros(&[g]);
        bias.data_mut()[units..2 * units].fill(1.0);
        Lstm {
            inputs,
            units,
            return_sequences,
            params: [
                Param::new("kernel", ParamRole::Weight, kernel),
                Param::new("recurrent_kernel", ParamRole::Weight, recurrent),
                Param::new("bias", ParamRole::Bias, bias),
            ],
            cache: None,
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn return_sequences(&self) -> bool {
        self.return_sequences
    }

    pub fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Tensor {
        assert_eq!(x.shape().len(), 3, "lstm expects [N, T, D]");
        let (n, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        assert_eq!(d, self.inputs, "lstm input width");
        let h = self.units;
        let g4 = 4 * h;
        let mut xw = vec![0.0; n * t * g4];
        gemm(n * t, d, g4, x.data(), false, self.params[0].value.data(), false, &mut xw, 0.0);
        let bias = self.params[2].value.data();
        let u = self.params[1].value.data();

        let mut gates = vec![0.0; t * n * g4];
        let mut cs = vec![0.0; t * n * h];
        let mut hs = vec![0.0; t * n * h];
        let mut z = vec![0.0; n * g4];
        for step in 0..t {
            for b in 0..n {
                let src = &xw[(b * t + step) * g4..(b * t + step + 1) * g4];
                for ((zv, s), bv) in z[b * g4..(b + 1) * g4].iter_mut().zip(src).zip(bias) {
                    *zv = s + bv;
                }
            }
            if step > 0 {
                let hprev = &hs[(step - 1) * n * h..step * n * h];
                gemm(n, h, g4, hprev, false, u, false, &mut z, 1.0);
            }
            let gt = &mut gates[step * n * g4..(step + 1) * n * g4];
            for b in 0..n {
                for j in 0..h {
                    let zr = &z[b * g4..(b + 1) * g4];
                    let i = sigmoid(zr[j]);
                    let f = sigmoid(zr[h + j]);
                    let g = zr[2 * h + j].tanh();
                    let o = sigmoid(zr[3 * h + j]);
                    let cprev = if step > 0 { cs[((step - 1) * n + b) * h + j] } else { 0.0 };
                    let c = f * cprev + i * g;
                    cs[(step * n + b) * h + j] = c;
                    hs[(step * n + b) * h + j] = o * c.tanh();
                    let gr = &mut gt[b * g4..(b + 1) * g4];
                    gr[j] = i;
                    gr[h + j] = f;
                    gr[2 * h + j] = g;
                    gr[3 * h + j] = o;
                }
            }
        }
        let out = if self.return_sequences {
            let mut data = vec![0.0; n * t * h];
            for step in 0..t {
                for b in 0..n {
                    data[(b * t + step) * h..(b * t + step + 1) * h]
                        .copy_from_slice(&hs[(step * n + b) * h..(step * n + b + 1) * h]);
                }
            }
            Tensor::from_parts(vec![n, t, h], data)
        } else {
            Tensor::from_parts(vec![n, h], hs[(t - 1) * n * h..].to_vec())
        };
        self.cache = Some(LstmCache {
            x: x.clone(),
            n,
            t,
            gates,
            c: cs,
            h: hs,
        });
        out
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let cache = self.cache.as_ref().expect("lstm backward before forward");
        let (n, t, d, h) = (cache.n, cache.t, self.inputs, self.units);
        let g4 = 4 * h;
        let gd = grad.data();
        let u = self.params[1].value.data();

        let mut dz_all = vec![0.0; n * t * g4];
        let mut dz = vec![0.0; n * g4];
        let mut dh_next = vec![0.0; n * h];
        let mut dc_next = vec![0.0; n * h];
        let mut du = vec![0.0; h * g4];
        for step in (0..t).rev() {
            let gt = &cache.gates[step * n * g4..(step + 1) * n * g4];
            for b in 0..n {
                for j in 0..h {
                    let upstream = if self.return_sequences {
                        gd[(b * t + step) * h + j]
                    } else if step == t - 1 {
                        gd[b * h + j]
                    } else {
                        0.0
                    };
                    let dh = upstream + dh_next[b * h + j];
                    let gr = &gt[b * g4..(b + 1) * g4];
                    let (i, f, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let tc = cache.c[(step * n + b) * h + j].tanh();
                    let cprev = if step > 0 {
                        cache.c[((step - 1) * n + b) * h + j]
                    } else {
                        0.0
                    };
                    let dc = dc_next[b * h + j] + dh * o * (1.0 - tc * tc);
                    dc_next[b * h + j] = dc * f;
                    let zr = &mut dz[b * g4..(b + 1) * g4];
                    zr[j] = dc * g * i * (1.0 - i);
                    zr[h + j] = dc * cprev * f * (1.0 - f);
                    zr[2 * h + j] = dc * i * (1.0 - g * g);
                    zr[3 * h + j] = dh * tc * o * (1.0 - o);
                }
            }
            for b in 0..n {
                dz_all[(b * t + step) * g4..(b * t + step + 1) * g4]
                    .copy_from_slice(&dz[b * g4..(b + 1) * g4]);
            }
            gemm(n, g4, h, &dz, false, u, true, &mut dh_next, 0.0);
            if step > 0 {
                let hprev = &cache.h[(step - 1) * n * h..step * n * h];
                gemm(h, n, g4, hprev, true, &dz, false, &mut du, 1.0);
            }
        }
        let [kernel, recurrent, bias] = &mut self.params;
        recurrent.grad.data_mut().copy_from_slice(&du);
        gemm(
            d,
            n * t,
            g4,
            cache.x.data(),
            true,
            &dz_all,
            false,
            kernel.grad.data_mut(),
            0.0,
        );
        bias.grad.fill(0.0);
        for row in dz_all.chunks(g4) {
            for (acc, v) in bias.grad.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut dx = vec![0.0; n * t * d];
        gemm(n * t, g4, d, &dz_all, false, kernel.value.data(), true, &mut dx, 0.0);
        Tensor::from_parts(vec![n, t, d], dx)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }
}
