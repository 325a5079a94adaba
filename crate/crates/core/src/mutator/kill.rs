//! Statistical kill check: is a mutant reliably worse than its seed model?

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::nn::{train, Dataset, Model, ModelConfig};
use crate::rng::SeedTree;

/// Thresholds of the kill decision. A mutant is killed when all three hold:
/// one-tailed Welch p below `alpha`, Cohen's d at least `min_effect`, and a
/// mean accuracy drop of at least `min_drop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KillCriteria {
    pub runs: usize,
    pub alpha: f64,
    pub min_effect: f64,
    pub min_drop: f64,
}

impl Default for KillCriteria {
    fn default() -> Self {
        KillCriteria {
            runs: 5,
            alpha: 0.05,
            min_effect: 0.5,
            min_drop: 0.05,
        }
    }
}

impl KillCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::Config(format!("kill check needs >= 2 runs, got {}", self.runs)));
        }
        Ok(())
    }
}

/// Train/test split of a target task.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetData {
    pub train: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillVerdict {
    pub killed: bool,
    pub p_value: f64,
    pub effect_size: f64,
    pub mean_acc_orig: f64,
    pub mean_acc_mut: f64,
    pub n_runs: usize,
}

/// Trains `model` once with the init and shuffle streams of `run` and
/// returns its test accuracy. Runs whose predictions are not finite count as
/// accuracy 0.
pub fn final_accuracy(model: &ModelConfig, data: &TargetData, run: SeedTree) -> Result<f64> {
    let mut net = Model::build(&model.spec, run.child("init").seed())?;
    let mut cfg = model.train.clone();
    cfg.seed = run.child("train").seed();
    train(&mut net, &data.train, &cfg, &mut ())?;
    let pred = net.predict(data.test.x())?;
    if !pred.all_finite() {
        return Ok(0.0);
    }
    Ok(crate::nn::loss::accuracy(&pred, data.test.y()))
}

/// Test accuracies of `runs` trainings. Run `i` always uses `seed.index(i)`,
/// so a seed model and its mutants are compared run-for-run.
pub fn run_accuracies(
    model: &ModelConfig,
    data: &TargetData,
    runs: usize,
    seed: SeedTree,
) -> Result<Vec<f64>> {
    (0..runs)
        .map(|i| final_accuracy(model, data, seed.index(i as u64)))
        .collect()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var)
}

/// One-tailed Welch t-test p-value for H1: mean(orig) > mean(mutant).
pub fn welch_p_value(orig: &[f64], mutant: &[f64]) -> f64 {
    let (n1, n2) = (orig.len() as f64, mutant.len() as f64);
    let (m1, v1) = mean_var(orig);
    let (m2, v2) = mean_var(mutant);
    let diff = m1 - m2;
    let (a, b) = (v1 / n1, v2 / n2);
    let se = (a + b).sqrt();
    if se == 0.0 {
        return if diff > 0.0 { 0.0 } else { 1.0 };
    }
    let t = diff / se;
    let df = (a + b).powi(2) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    1.0 - dist.cdf(t)
}

/// Cohen's d with pooled sample standard deviation, signed so that a worse
/// mutant is positive. Zero spread gives ±inf for a nonzero difference.
pub fn cohens_d(orig: &[f64], mutant: &[f64]) -> f64 {
    let (n1, n2) = (orig.len() as f64, mutant.len() as f64);
    let (m1, v1) = mean_var(orig);
    let (m2, v2) = mean_var(mutant);
    let pooled = (((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0)).sqrt();
    let diff = m1 - m2;
    if pooled == 0.0 {
        return if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
    }
    diff / pooled
}

/// Applies the kill decision to paired accuracy samples.
pub fn verdict(orig: &[f64], mutant: &[f64], criteria: &KillCriteria) -> KillVerdict {
    let p_value = welch_p_value(orig, mutant);
    let effect_size = cohens_d(orig, mutant);
    let mean_acc_orig = mean_var(orig).0;
    let mean_acc_mut = mean_var(mutant).0;
    let killed = p_value < criteria.alpha
        && effect_size >= criteria.min_effect
        && mean_acc_orig - mean_acc_mut >= criteria.min_drop;
    KillVerdict {
        killed,
        p_value,
        effect_size,
        mean_acc_orig,
        mean_acc_mut,
        n_runs: orig.len().min(mutant.len()),
    }
}

/// Trains both models `criteria.runs` times with paired seeds and compares
/// their test accuracies.
pub fn is_killed(
    original: &ModelConfig,
    mutant: &ModelConfig,
    data: &TargetData,
    criteria: &KillCriteria,
    seed: SeedTree,
) -> Result<KillVerdict> {
    criteria.validate()?;
    let a = run_accuracies(original, data, criteria.runs, seed)?;
    let b = run_accuracies(mutant, data, criteria.runs, seed)?;
    Ok(verdict(&a, &b, criteria))
}
