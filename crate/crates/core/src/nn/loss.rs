//! Loss functions over `[..., C]` outputs with matching targets.
//!
//! Every loss is averaged over all leading positions (batch, and time steps
//! for sequence outputs). MSE and binary cross-entropy additionally average
//! over the class axis; categorical cross-entropy sums over it.

use super::spec::LossKind;
use super::tensor::Tensor;

/// Probability clamp for the cross-entropy losses.
pub const PROB_EPS: f64 = 1e-7;

pub fn loss_value(kind: LossKind, pred: &Tensor, target: &Tensor) -> f64 {
    debug_assert_eq!(pred.shape(), target.shape());
    let c = pred.last_dim();
    let rows = (pred.len() / c) as f64;
    let (p, y) = (pred.data(), target.data());
    let total: f64 = match kind {
        LossKind::Mse => p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / c as f64,
        LossKind::CategoricalCrossentropy => p
            .iter()
            .zip(y)
            .map(|(&a, &b)| -b * clamp_prob(a).ln())
            .sum(),
        LossKind::BinaryCrossentropy => {
            p.iter()
                .zip(y)
                .map(|(&a, &b)| {
                    let a = clamp_prob(a);
                    -(b * a.ln() + (1.0 - b) * (1.0 - a).ln())
                })
                .sum::<f64>()
                / c as f64
        }
    };
    total / rows
}

/// Gradient of [`loss_value`] w.r.t. `pred`.
pub fn loss_grad(kind: LossKind, pred: &Tensor, target: &Tensor) -> Tensor {
    let c = pred.last_dim();
    let rows = (pred.len() / c) as f64;
    let (p, y) = (pred.data(), target.data());
    let data: Vec<f64> = match kind {
        LossKind::Mse => p
            .iter()
            .zip(y)
            .map(|(a, b)| 2.0 * (a - b) / (c as f64 * rows))
            .collect(),
        LossKind::CategoricalCrossentropy => p
            .iter()
            .zip(y)
            .map(|(&a, &b)| {
                if in_clamp(a) {
                    -b / a / rows
                } else {
                    0.0
                }
            })
            .collect(),
        LossKind::BinaryCrossentropy => p
            .iter()
            .zip(y)
            .map(|(&a, &b)| {
                if in_clamp(a) {
                    (a - b) / (a * (1.0 - a)) / (c as f64 * rows)
                } else {
                    0.0
                }
            })
            .collect(),
    };
    Tensor::from_parts(pred.shape().to_vec(), data)
}

fn clamp_prob(p: f64) -> f64 {
    if p.is_nan() {
        p
    } else {
        p.clamp(PROB_EPS, 1.0 - PROB_EPS)
    }
}

fn in_clamp(p: f64) -> bool {
    p > PROB_EPS && p < 1.0 - PROB_EPS || p.is_nan()
}

/// Fraction of rows whose argmax matches the target argmax.
pub fn accuracy(pred: &Tensor, target: &Tensor) -> f64 {
    let c = pred.last_dim();
    let rows = pred.len() / c;
    let hits = pred
        .data()
        .chunks(c)
        .zip(target.data().chunks(c))
        .filter(|(p, y)| argmax(p) == argmax(y))
        .count();
    hits as f64 / rows as f64
}

/// Index of the first maximum; `None` when any entry is NaN.
pub fn argmax(row: &[f64]) -> Option<usize> {
    if row.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mse_at_targets() {
        let y = Tensor::new(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(loss_value(LossKind::Mse, &y, &y), 0.0);
        assert!(loss_grad(LossKind::Mse, &y, &y).data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn nan_predictions_never_count_as_hits() {
        let p = Tensor::new(vec![1, 2], vec![f64::NAN, 0.0]).unwrap();
        let y = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        assert_eq!(accuracy(&p, &y), 0.0);
        assert!(loss_value(LossKind::CategoricalCrossentropy, &p, &y).is_nan());
    }
}
