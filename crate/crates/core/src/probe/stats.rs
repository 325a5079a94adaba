//! Descriptive statistics and the per-layer health metrics derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eight-number summary of a value array.
///
/// Conventions: population variance and std, SEM from the sample (n - 1)
/// std, Fisher-Pearson skew from population moments, median interpolated
/// between the two middle order statistics. Degenerate inputs (n = 1 or zero
/// spread) give zero variance, std, sem and skew.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StatVector {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub variance: f64,
    pub std: f64,
    pub sem: f64,
    pub skew: f64,
}

impl StatVector {
    /// Column-name stems in [`StatVector::to_array`] order.
    pub const NAMES: [&'static str; 8] = ["M", "Mi", "Ma", "Me", "V", "S", "Se", "Sk"];

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.mean,
            self.min,
            self.max,
            self.median,
            self.variance,
            self.std,
            self.sem,
            self.skew,
        ]
    }

    fn all(v: f64) -> Self {
        StatVector {
            mean: v,
            min: v,
            max: v,
            median: v,
            variance: v,
            std: v,
            sem: v,
            skew: v,
        }
    }
}

/// Streaming central moments up to third order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn population_variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.m2 / self.n as f64
        }
    }

    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn skew(&self) -> f64 {
        if self.m2 == 0.0 {
            0.0
        } else {
            (self.n as f64).sqrt() * self.m3 / self.m2.powf(1.5)
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        iter.into_iter().for_each(|x| m.push(x));
        m
    }
}

pub fn descriptive_stats(values: &[f64]) -> Result<StatVector> {
    if values.is_empty() {
        return Err(Error::Empty("descriptive statistics need at least one value"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Ok(StatVector::all(f64::NAN));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
        a + (b - a) / 2.0
    };
    let (min, max) = (sorted[0], sorted[n - 1]);
    if !min.is_finite() || !max.is_finite() {
        // moments of infinite data are undefined; the sanitizer maps them later
        let mean = values.iter().sum::<f64>() / n as f64;
        return Ok(StatVector {
            mean,
            min,
            max,
            median,
            ..StatVector::all(f64::NAN)
        });
    }
    let m: Moments = values.iter().copied().collect();
    let variance = m.population_variance();
    Ok(StatVector {
        mean: m.mean(),
        min,
        max,
        median,
        variance,
        std: variance.sqrt(),
        sem: (m.sample_variance() / n as f64).sqrt(),
        skew: m.skew(),
    })
}

/// Euclidean norm.
pub fn tensor_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Mean absolute gradient; small values signal stalled learning.
pub fn vanishing_gradient_metric(grads: &[f64]) -> f64 {
    if grads.is_empty() {
        return 0.0;
    }
    grads.iter().map(|g| g.abs()).sum::<f64>() / grads.len() as f64
}

/// Fraction of units whose largest absolute activation over an epoch stays
/// below `threshold`. Takes the per-unit maxima.
pub fn dead_node_fraction(unit_max_abs: &[f64], threshold: f64) -> f64 {
    if unit_max_abs.is_empty() {
        return 0.0;
    }
    let dead = unit_max_abs.iter().filter(|&&m| m < threshold).count();
    dead as f64 / unit_max_abs.len() as f64
}

/// Fraction of activation values at or beyond either threshold.
pub fn saturation_fraction(values: &[f64], min_thr: f64, max_thr: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.iter().filter(|&&v| v <= min_thr || v >= max_thr).count();
    n as f64 / values.len() as f64
}

/// Gradient-to-weight norm ratio, 0 when the weight norm is 0.
pub fn tune_learning_ratio(grad_norm: f64, weight_norm: f64) -> f64 {
    if weight_norm == 0.0 {
        0.0
    } else {
        grad_norm / weight_norm
    }
}
