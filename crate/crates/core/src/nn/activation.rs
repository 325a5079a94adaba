use super::spec::Activation;
use super::tensor::Tensor;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies `act` elementwise (softmax along the last axis) in place.
pub fn apply(act: Activation, t: &mut Tensor) {
    match act {
        Activation::Linear | Activation::None => {}
        Activation::Relu => t.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => t.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Tanh => t.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Softmax => {
            let w = t.last_dim();
            for row in t.data_mut().chunks_mut(w) {
                softmax_in_place(row);
            }
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Gradient w.r.t. the pre-activation, given the activation output `y` and
/// the gradient `g` w.r.t. that output. Overwrites `g`.
pub fn backward(act: Activation, y: &Tensor, g: &mut Tensor) {
    let yd = y.data();
    match act {
        Activation::Linear | Activation::None => {}
        Activation::Relu => {
            for (gv, &yv) in g.data_mut().iter_mut().zip(yd) {
                if yv <= 0.0 {
                    *gv = 0.0;
                }
            }
        }
        Activation::Sigmoid => {
            for (gv, &yv) in g.data_mut().iter_mut().zip(yd) {
                *gv *= yv * (1.0 - yv);
            }
        }
        Activation::Tanh => {
            for (gv, &yv) in g.data_mut().iter_mut().zip(yd) {
                *gv *= 1.0 - yv * yv;
            }
        }
        Activation::Softmax => {
            let w = y.last_dim();
            for (grow, yrow) in g.data_mut().chunks_mut(w).zip(yd.chunks(w)) {
                let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                for (gv, &yv) in grow.iter_mut().zip(yrow) {
                    *gv = yv * (*gv - dot);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_normalize() {
        let mut t = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1000.0, 0.0, 1000.0]).unwrap();
        apply(Activation::Softmax, &mut t);
        for r in 0..2 {
            assert!((t.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
