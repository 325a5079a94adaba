use super::{ForwardCtx, Param};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Flatten {
    input: Vec<usize>,
}

impl Flatten {
    pub fn new(input: &[usize]) -> Self {
        Flatten {
            input: input.to_vec(),
        }
    }

    pub fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Tensor {
        let n = x.rows();
        x.clone().reshape(&[n, x.row_len()])
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut shape = vec![grad.rows()];
        shape.extend_from_slice(&self.input);
        grad.clone().reshape(&shape)
    }

    pub fn params(&self) -> &[Param] {
        &[]
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut []
    }
}

/// `[N, D] -> [N, K, D]`.
#[derive(Debug, Clone)]
pub struct RepeatVector {
    repeat: usize,
}

impl RepeatVector {
    pub fn new(repeat: usize) -> Self {
        RepeatVector { repeat }
    }

    pub fn repeat(&self) -> usize {
        self.repeat
    }

    pub fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Tensor {
        let (n, d) = (x.rows(), x.row_len());
        let mut data = Vec::with_capacity(n * self.repeat * d);
        for i in 0..n {
            for _ in 0..self.repeat {
                data.extend_from_slice(x.row(i));
            }
        }
        Tensor::from_parts(vec![n, self.repeat, d], data)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let n = grad.rows();
        let d = grad.last_dim();
        let mut data = vec![0.0; n * d];
        for (i, out) in data.chunks_mut(d).enumerate() {
            for k in 0..self.repeat {
                let off = (i * self.repeat + k) * d;
                for (o, g) in out.iter_mut().zip(&grad.data()[off..off + d]) {
                    *o += g;
                }
            }
        }
        Tensor::from_parts(vec![n, d], data)
    }

    pub fn params(&self) -> &[Param] {
        &[]
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut []
    }
}

/// Concatenates two tensors with equal leading shape along the last axis.
pub fn concat_last(a: &Tensor, b: &Tensor) -> Tensor {
    let (da, db) = (a.last_dim(), b.last_dim());
    assert_eq!(a.len() / da, b.len() / db, "concatenate leading shapes differ");
    let mut data = Vec::with_capacity(a.len() + b.len());
    for (ra, rb) in a.data().chunks(da).zip(b.data().chunks(db)) {
        data.extend_from_slice(ra);
        data.extend_from_slice(rb);
    }
    let mut shape = a.shape().to_vec();
    *shape.last_mut().unwrap() = da + db;
    Tensor::from_parts(shape, data)
}

/// Inverse of [`concat_last`]: splits the last axis at `first`.
pub fn split_last(t: &Tensor, first: usize) -> (Tensor, Tensor) {
    let d = t.last_dim();
    let second = d - first;
    let rows = t.len() / d;
    let mut a = Vec::with_capacity(rows * first);
    let mut b = Vec::with_capacity(rows * second);
    for r in t.data().chunks(d) {
        a.extend_from_slice(&r[..first]);
        b.extend_from_slice(&r[first..]);
    }
    let mut sa = t.shape().to_vec();
    let mut sb = sa.clone();
    *sa.last_mut().unwrap() = first;
    *sb.last_mut().unwrap() = second;
    (Tensor::from_parts(sa, a), Tensor::from_parts(sb, b))
}
