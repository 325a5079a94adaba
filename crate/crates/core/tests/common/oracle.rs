//! Naive textbook formulas used as independent references for the
//! statistics module.

/// Compensated sum followed by one refinement pass, so a constant array has
/// a mean equal to its value.
pub fn mean(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = neumaier(v.iter().copied()) / n;
    m + neumaier(v.iter().map(|x| x - m)) / n
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in values {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

pub fn min(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn central_moment(v: &[f64], k: i32) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(k)).sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    central_moment(v, 2)
}

pub fn std(v: &[f64]) -> f64 {
    variance(v).sqrt()
}

pub fn sem(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let s = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
    s / n.sqrt()
}

pub fn skew(v: &[f64]) -> f64 {
    let m2 = central_moment(v, 2);
    if m2 == 0.0 {
        return 0.0;
    }
    central_moment(v, 3) / m2.powf(1.5)
}

pub fn l2(v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for x in v {
        acc += x * x;
    }
    acc.sqrt()
}

pub fn mean_abs(v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for x in v {
        acc += x.abs();
    }
    acc / v.len() as f64
}

pub fn dead_fraction(unit_max: &[f64], thr: f64) -> f64 {
    let mut dead = 0usize;
    for &m in unit_max {
        if m < thr {
            dead += 1;
        }
    }
    dead as f64 / unit_max.len() as f64
}

pub fn saturated_fraction(v: &[f64], lo: f64, hi: f64) -> f64 {
    let mut count = 0usize;
    for &x in v {
        if !(x > lo && x < hi) {
            count += 1;
        }
    }
    count as f64 / v.len() as f64
}

pub fn ratio(g: f64, w: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        g / w
    }
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

use d4d::probe;
use rand::Rng;

/// One random array: length 1..=1000, a single magnitude drawn log-uniformly
/// from 1e-8..1e8, and a shape drawn from {uniform, constant, length one,
/// one-sided, spiky}.
pub fn random_array(rng: &mut impl Rng) -> Vec<f64> {
    let n = rng.random_range(1..=1000);
    let scale = 10f64.powf(rng.random_range(-8.0..8.0));
    match rng.random_range(0..5) {
        0 => vec![scale * rng.random_range(-1.0..1.0); n],
        1 => vec![scale * rng.random_range(-1.0..1.0)],
        2 => (0..n).map(|_| scale * rng.random_range(0.0..1.0)).collect(),
        3 => (0..n)
            .map(|i| if i % 17 == 0 { scale } else { scale * 1e-3 * rng.random_range(-1.0..1.0) })
            .collect(),
        _ => (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Checks every probe statistic on `v` against the naive formulas and returns
/// a description of the first mismatch.
pub fn check_array(v: &[f64], tol: f64) -> Result<(), String> {
    let s = probe::descriptive_stats(v).map_err(|e| e.to_string())?;
    let pairs = [
        ("mean", s.mean, mean(v)),
        ("min", s.min, min(v)),
        ("max", s.max, max(v)),
        ("median", s.median, median(v)),
        ("variance", s.variance, variance(v)),
        ("std", s.std, std(v)),
        ("sem", s.sem, sem(v)),
        ("skew", s.skew, skew(v)),
        ("norm", probe::tensor_norm(v), l2(v)),
        ("vg", probe::vanishing_gradient_metric(v), mean_abs(v)),
    ];
    for (name, got, want) in pairs {
        if !close(got, want, tol) {
            return Err(format!("{name}: got {got:e}, oracle {want:e} (n = {})", v.len()));
        }
    }
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let thr = median(&abs);
    if probe::dead_node_fraction(&abs, thr) != dead_fraction(&abs, thr) {
        return Err("dead-node fraction".into());
    }
    let (lo, hi) = (min(v) * 0.5, max(v) * 0.5);
    if probe::saturation_fraction(v, lo, hi) != saturated_fraction(v, lo, hi) {
        return Err("saturation fraction".into());
    }
    let (g, w) = (l2(v), mean_abs(v));
    if !close(probe::tune_learning_ratio(g, w), ratio(g, w), tol) || probe::tune_learning_ratio(g, 0.0) != 0.0 {
        return Err("tune-learning ratio".into());
    }
    Ok(())
}
