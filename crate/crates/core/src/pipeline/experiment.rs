//! Classifier training, repeated evaluation and diagnosis of new models.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::corpus::{featurize, Corpus, CorpusCounts};
use super::split::SPLIT_NAMES;
use crate::error::{Error, Result};
use crate::localizer::{
    confusion, evaluate, label_steps, train_classifier, Batchable, ClassifierSpec, Diagnosis, FitHistory,
    FitOptions, Localizer, Scores,
};
use crate::mutator::{class_name, Category, NUM_CLASSES};
use crate::nn::{Dataset, ModelConfig};
use crate::rng::SeedTree;

/// Full-scale figures published for the 8-operator setting, shown next to
/// desk-scale results for orientation only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

pub const FULL_SCALE_REFERENCE: Reference = Reference { accuracy: 0.9415, precision: 0.8683, recall: 0.7916 };

/// Trains one localizer on the corpus's training split, validating on its
/// validation split.
pub fn train_localizer(
    corpus: &Corpus,
    spec: ClassifierSpec,
    fit: &FitOptions,
    seed: u64,
) -> Result<(Localizer, FitHistory)> {
    let (classifier, history) = train_classifier(
        spec,
        corpus.input_shape(),
        &corpus.split("train"),
        &corpus.split("val"),
        fit,
        seed,
    )?;
    let loc = Localizer {
        classifier,
        vocab: corpus.vocab.clone(),
        max_layers: corpus.summary.max_layers,
        probe: corpus.summary.probe,
    };
    Ok((loc, history))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageScores {
    pub train: Scores,
    pub val: Scores,
    pub test: Scores,
}

impl StageScores {
    fn mean(all: &[StageScores]) -> StageScores {
        let n = all.len().max(1) as f64;
        let avg = |f: &dyn Fn(&StageScores) -> Scores| Scores {
            precision: all.iter().map(|s| f(s).precision).sum::<f64>() / n,
            recall: all.iter().map(|s| f(s).recall).sum::<f64>() / n,
            accuracy: all.iter().map(|s| f(s).accuracy).sum::<f64>() / n,
        };
        StageScores { train: avg(&|s| s.train), val: avg(&|s| s.val), test: avg(&|s| s.test) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KillRate {
    pub label: u8,
    pub operator: String,
    pub tried: usize,
    pub killed: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub counts: CorpusCounts,
    pub split_sizes: BTreeMap<String, usize>,
    pub kill_rates: Vec<KillRate>,
    pub runs: Vec<StageScores>,
    pub mean: StageScores,
    /// Per-step test accuracy of always predicting the training split's
    /// most frequent class at each decoder step.
    pub majority_baseline: f64,
    /// Step-level test confusion summed over runs, `[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub reference: Reference,
    pub wall_clock_s: BTreeMap<String, f64>,
}

/// Encodes every sample of a split into its decoder steps.
fn split_steps(corpus: &Corpus, name: &str, steps: usize) -> Result<Vec<Vec<u8>>> {
    corpus.split(name).iter().map(|s| label_steps(&s.labels, steps)).collect()
}

pub fn majority_baseline(train: &[Vec<u8>], test: &[Vec<u8>]) -> f64 {
    let steps = train.first().map_or(0, Vec::len);
    if steps == 0 || test.is_empty() {
        return 0.0;
    }
    let majority: Vec<u8> = (0..steps)
        .map(|k| {
            let mut counts = [0usize; 256];
            train.iter().for_each(|s| counts[s[k] as usize] += 1);
            // First class with the highest count.
            (0..256).rev().max_by_key(|&c| counts[c]).unwrap() as u8
        })
        .collect();
    let hits: usize = test.iter().map(|t| t.iter().zip(&majority).filter(|(a, b)| a == b).count()).sum();
    hits as f64 / (test.len() * steps) as f64
}

fn kill_rates(corpus: &Corpus) -> Vec<KillRate> {
    let mut by_label: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    for s in &corpus.summary.single_fault {
        let e = by_label.entry(s.label).or_default();
        e.0 += 1;
        e.1 += usize::from(s.killed);
    }
    by_label
        .into_iter()
        .map(|(label, (tried, killed))| KillRate {
            label,
            operator: class_name(label).to_string(),
            tried,
            killed,
            rate: killed as f64 / tried.max(1) as f64,
        })
        .collect()
}

/// Trains the classifier `runs` times with seeds derived from `seed` and
/// reports the mean scores per split.
pub fn run_experiment(
    corpus: &Corpus,
    spec: ClassifierSpec,
    fit: &FitOptions,
    runs: usize,
    seed: u64,
) -> Result<Report> {
    if runs == 0 {
        return Err(Error::Config("runs must be >= 1".into()));
    }
    let mut wall = BTreeMap::new();
    let sets: Vec<Batchable> = SPLIT_NAMES
        .iter()
        .map(|n| Batchable::new(&corpus.split(n), spec.steps))
        .collect::<Result<_>>()?;
    if sets.iter().any(Batchable::is_empty) {
        return Err(Error::Config("every split needs at least one record".into()));
    }
    let root = SeedTree::new(seed).child("classifier");
    let mut per_run = Vec::with_capacity(runs);
    let mut conf = vec![vec![0usize; spec.classes]; spec.classes];
    let (mut t_train, mut t_eval) = (0.0, 0.0);
    for r in 0..runs {
        let t = Instant::now();
        let (loc, _) = train_localizer(corpus, spec, fit, root.index(r as u64).seed())?;
        t_train += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let scores: Vec<Scores> = sets.iter().map(|s| evaluate(&loc.classifier, s)).collect::<Result<_>>()?;
        let test = &sets[2];
        let pred = loc.classifier.predict_steps(&test.traces, &test.tokens)?;
        for (row, add) in conf.iter_mut().zip(confusion(&pred, &test.steps, spec.classes)) {
            row.iter_mut().zip(add).for_each(|(a, b)| *a += b);
        }
        t_eval += t.elapsed().as_secs_f64();
        log::info!("classifier run {r}: test accuracy {:.3}", scores[2].accuracy);
        per_run.push(StageScores { train: scores[0], val: scores[1], test: scores[2] });
    }
    wall.insert("classifier_training".to_string(), t_train);
    wall.insert("evaluation".to_string(), t_eval);
    let split_sizes = SPLIT_NAMES.iter().zip(&sets).map(|(n, s)| (n.to_string(), s.len())).collect();
    Ok(Report {
        counts: corpus.counts(),
        split_sizes,
        kill_rates: kill_rates(corpus),
        mean: StageScores::mean(&per_run),
        runs: per_run,
        majority_baseline: majority_baseline(&split_steps(corpus, "train", spec.steps)?, &split_steps(corpus, "test", spec.steps)?),
        confusion: conf,
        reference: FULL_SCALE_REFERENCE,
        wall_clock_s: wall,
    })
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.counts;
        let _ = writeln!(s, "corpus: {} records ({} correct, {} single-fault, {} dual-fault)", c.total(), c.correct, c.single, c.multi);
        let _ = writeln!(s, "splits: {:?}", self.split_sizes);
        let _ = writeln!(s, "\nsingle-fault kill rates:");
        for k in &self.kill_rates {
            let _ = writeln!(s, "  {:>2} {:<30} {:>3}/{:<3} {:.2}", k.label, k.operator, k.killed, k.tried, k.rate);
        }
        let _ = writeln!(s, "\nclassifier, mean of {} runs:", self.runs.len());
        let _ = writeln!(s, "  {:<6} {:>9} {:>9} {:>9}", "split", "accuracy", "precision", "recall");
        for (name, sc) in [("train", self.mean.train), ("val", self.mean.val), ("test", self.mean.test)] {
            let _ = writeln!(s, "  {name:<6} {:>9.4} {:>9.4} {:>9.4}", sc.accuracy, sc.precision, sc.recall);
        }
        let _ = writeln!(s, "  majority-class baseline (test accuracy): {:.4}", self.majority_baseline);
        let r = self.reference;
        let _ = writeln!(
            s,
            "  full-scale reference, 8 operators (not a desk-scale target): accuracy {:.4}, precision {:.4}, recall {:.4}",
            r.accuracy, r.precision, r.recall
        );
        let _ = writeln!(s, "\ntest confusion (rows = truth, cols = predicted, summed over runs):");
        let _ = write!(s, "    ");
        for p in 0..NUM_CLASSES.min(self.confusion.len()) {
            let _ = write!(s, "{p:>5}");
        }
        let _ = writeln!(s);
        for (t, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "  {t:>2}");
            for v in row {
                let _ = write!(s, "{v:>5}");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s, "\nwall clock:");
        for (phase, secs) in &self.wall_clock_s {
            let _ = writeln!(s, "  {phase:<22} {secs:>8.1} s");
        }
        s
    }
}

/// Trains `model` once with instrumentation and asks the localizer what is
/// wrong with it.
pub fn diagnose(loc: &Localizer, model: &ModelConfig, data: &Dataset, seed: u64) -> Result<Diagnosis> {
    let fm = featurize(model, data, SeedTree::new(seed).child("diagnose"), loc.epochs(), loc.max_layers, loc.probe)?;
    loc.diagnose(&fm, &model.spec)
}

/// Fault groups used to check corpus coverage: the three activation
/// operators form one group, every other operator its own.
pub fn coverage_group(c: Category) -> u8 {
    match c.label() {
        4..=6 => 4,
        l => l,
    }
}
