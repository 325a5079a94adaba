//! Label encoding, decoding and scoring.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mutator::{class_description, class_name, CORRECT_LABEL};
use crate::nn::loss::argmax;
use crate::nn::Tensor;

/// Encodes a sorted label list as `steps` class ids: the fault labels in
/// order, then the correct-model class as filler.
pub fn label_steps(labels: &[u8], steps: usize) -> Result<Vec<u8>> {
    let mut faults: Vec<u8> = labels.iter().copied().filter(|&l| l != CORRECT_LABEL).collect();
    faults.sort_unstable();
    faults.dedup();
    if faults.len() > steps {
        return Err(Error::Config(format!("{} fault labels exceed {steps} decoder steps", faults.len())));
    }
    faults.resize(steps, CORRECT_LABEL);
    Ok(faults)
}

/// One-hot `[N, K, classes]` targets for a batch of step sequences.
pub fn step_targets(steps: &[Vec<u8>], classes: usize) -> Tensor {
    let k = steps.first().map_or(1, Vec::len);
    let mut data = vec![0.0; steps.len() * k * classes];
    for (i, s) in steps.iter().enumerate() {
        for (j, &c) in s.iter().enumerate() {
            data[(i * k + j) * classes + c as usize] = 1.0;
        }
    }
    Tensor::new(vec![steps.len(), k, classes], data).expect("target shape")
}

/// The root-cause set of a step sequence: distinct non-zero classes, or
/// `{0}` when there are none.
pub fn decode_set(steps: &[u8]) -> Vec<u8> {
    let set: BTreeSet<u8> = steps.iter().copied().filter(|&c| c != CORRECT_LABEL).collect();
    if set.is_empty() {
        vec![CORRECT_LABEL]
    } else {
        set.into_iter().collect()
    }
}

/// Per-step argmax classes of `[N, K, C]` outputs. Rows without a finite
/// maximum decode as the correct class.
pub fn decode_steps(out: &Tensor, steps: usize) -> Vec<Vec<u8>> {
    out.data()
        .chunks(out.last_dim())
        .map(|row| argmax(row).unwrap_or(0) as u8)
        .collect::<Vec<_>>()
        .chunks(steps)
        .map(<[u8]>::to_vec)
        .collect()
}

/// Classifier output for one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    /// `K` probability distributions over the classes.
    pub steps: Vec<Vec<f64>>,
    /// Decoded root-cause set.
    pub labels: Vec<u8>,
    /// Highest probability each class reaches over the steps.
    pub class_max: Vec<f64>,
}

impl Diagnosis {
    pub fn from_steps(steps: Vec<Vec<f64>>) -> Self {
        let classes = steps.first().map_or(0, Vec::len);
        let mut class_max = vec![0.0f64; classes];
        for s in &steps {
            for (m, &p) in class_max.iter_mut().zip(s) {
                *m = m.max(p);
            }
        }
        let argmaxes: Vec<u8> = steps.iter().map(|s| argmax(s).unwrap_or(0) as u8).collect();
        Diagnosis { labels: decode_set(&argmaxes), steps, class_max }
    }

    /// Classes ordered by their maximum probability, highest first.
    pub fn ranked(&self) -> Vec<(u8, f64)> {
        let mut r: Vec<(u8, f64)> = self.class_max.iter().enumerate().map(|(c, &p)| (c as u8, p)).collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        r
    }

    pub fn is_correct(&self) -> bool {
        self.labels == [CORRECT_LABEL]
    }

    /// Human-readable summary listing the decoded classes and the top ranks.
    pub fn report(&self, top: usize) -> String {
        let mut s = String::new();
        if self.is_correct() {
            let _ = writeln!(s, "no fault detected (class 0)");
        } else {
            let _ = writeln!(s, "detected root causes:");
            for &l in &self.labels {
                let _ = writeln!(s, "  class {l} - {} ({}), p = {:.3}", class_description(l), class_name(l), self.class_max[l as usize]);
            }
        }
        let _ = writeln!(s, "ranking:");
        for (c, p) in self.ranked().into_iter().take(top) {
            let _ = writeln!(s, "  {c:>2} {:<30} {p:.4}", class_name(c));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

/// Micro-averaged precision and recall of the decoded label sets over the
/// fault classes, plus per-step accuracy. A ratio whose denominator is zero
/// is 1 when both denominators are zero (nothing predicted, nothing to
/// find) and 0 otherwise.
pub fn score(predicted: &[Vec<u8>], truth: &[Vec<u8>]) -> Result<Scores> {
    if predicted.is_empty() || predicted.len() != truth.len() {
        return Err(Error::Empty("score needs equally long, non-empty prediction and truth lists"));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    let (mut hits, mut total) = (0usize, 0usize);
    for (p, t) in predicted.iter().zip(truth) {
        let ps: BTreeSet<u8> = decode_set(p).into_iter().filter(|&c| c != CORRECT_LABEL).collect();
        let ts: BTreeSet<u8> = decode_set(t).into_iter().filter(|&c| c != CORRECT_LABEL).collect();
        tp += ps.intersection(&ts).count();
        fp += ps.difference(&ts).count();
        fneg += ts.difference(&ps).count();
        hits += p.iter().zip(t).filter(|(a, b)| a == b).count();
        total += t.len().max(p.len());
    }
    let both_empty = tp + fp == 0 && tp + fneg == 0;
    let ratio = |num: usize, den: usize| {
        if den > 0 {
            num as f64 / den as f64
        } else if both_empty {
            1.0
        } else {
            0.0
        }
    };
    Ok(Scores {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fneg),
        accuracy: hits as f64 / total as f64,
    })
}

/// Step-level confusion counts, `[truth][predicted]`.
pub fn confusion(predicted: &[Vec<u8>], truth: &[Vec<u8>], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; classes]; classes];
    for (p, t) in predicted.iter().zip(truth) {
        for (&a, &b) in p.iter().zip(t) {
            m[b as usize][a as usize] += 1;
        }
    }
    m
}
