//! Corpus generation and loading.
//!
//! On disk a corpus is a directory holding `manifest.csv`, `vocab.json`,
//! `summary.json` and one `traces/<id>.csv`, `tokens/<id>.json` and
//! `graphs/<id>.json` per record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seeds::SeedModel;
use super::split::{stratified_split, SPLIT_NAMES};
use crate::error::{Error, Result};
use crate::graph::{encode_and_pad, export_graph, GraphDoc, TokenSequence, Vocab};
use crate::localizer::Sample;
use crate::mutator::{
    apply_all, inject_multiple, labels_of, read_manifest, run_accuracies, single_fault_sweep, verdict,
    write_manifest, Category, KillVerdict, ManifestRow, TargetData, CORRECT_LABEL,
};
use crate::nn::{Dataset, Model, ModelConfig};
use crate::probe::{assemble_feature_matrix, train_instrumented, FeatureMatrix, ProbeConfig};
use crate::rng::SeedTree;

/// Trains `model` once with instrumentation and returns its feature matrix.
/// The run's init and shuffle streams come from `run`.
pub fn featurize(
    model: &ModelConfig,
    data: &Dataset,
    run: SeedTree,
    epochs: usize,
    max_layers: usize,
    probe: ProbeConfig,
) -> Result<FeatureMatrix> {
    let mut net = Model::build(&model.spec, run.child("init").seed())?;
    let mut cfg = model.train.clone();
    cfg.seed = run.child("train").seed();
    let run = train_instrumented(&mut net, data, &cfg, probe)?;
    assemble_feature_matrix(&run.snapshots, epochs, max_layers)
}

/// Generates a seed's task data and splits it into target train/test sets.
pub fn target_data(seed: &SeedModel, test_fraction: f64, root: SeedTree) -> Result<TargetData> {
    let stream = root.child("task").child(&seed.id);
    let data = seed.task.generate(stream)?;
    let (train, test) = data.split(1.0 - test_fraction, stream.child("split"));
    Ok(TargetData { train, test })
}

/// Kill outcome of one grid operator on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KillStat {
    pub seed_id: String,
    pub operator: String,
    pub label: u8,
    pub killed: bool,
    pub p_value: f64,
    pub effect_size: f64,
    pub mean_acc_orig: f64,
    pub mean_acc_mut: f64,
}

/// Corpus-wide settings and kill statistics, stored as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub epochs: usize,
    pub max_layers: usize,
    pub seq_len: usize,
    pub probe: ProbeConfig,
    pub seeds: Vec<String>,
    /// Mean unmutated test accuracy per seed.
    pub seed_accuracy: BTreeMap<String, f64>,
    pub single_fault: Vec<KillStat>,
    /// Dual-fault candidates kill-checked and killed, per seed.
    pub multi_checked: BTreeMap<String, (usize, usize)>,
}

/// One finished record before vocabulary encoding.
struct Pending {
    id: String,
    /// Mutant the record was traced from; replicas of one mutant share it.
    mutant: String,
    seed_id: String,
    labels: Vec<u8>,
    verdict: Option<KillVerdict>,
    features: FeatureMatrix,
    graph: GraphDoc,
}

struct SeedOutput {
    records: Vec<Pending>,
    stats: Vec<KillStat>,
    accuracy: f64,
    multi: (usize, usize),
}

fn verdict_fields(v: &Option<KillVerdict>) -> (bool, f64, f64) {
    v.map_or((false, f64::NAN, f64::NAN), |v| (v.killed, v.p_value, v.effect_size))
}

fn process_seed(seed: &SeedModel, cfg: &ExperimentConfig, root: SeedTree) -> Result<SeedOutput> {
    let data = target_data(seed, cfg.target_test_fraction, root)?;
    let grid = seed.grid.as_ref().unwrap_or(&cfg.grid);
    let kill_seed = root.child("kill").child(&seed.id);
    let sweep = single_fault_sweep(&seed.id, &seed.model, grid, &data, &cfg.kill, cfg.accuracy_floor, kill_seed)?;
    let accuracy = sweep.baseline.iter().sum::<f64>() / sweep.baseline.len() as f64;
    log::info!(
        "{}: baseline {accuracy:.3}, {} of {} single faults killed",
        seed.id,
        sweep.killed().count(),
        sweep.results.len()
    );
    let stats = sweep
        .results
        .iter()
        .map(|r| KillStat {
            seed_id: seed.id.clone(),
            operator: r.op.to_string(),
            label: r.op.label(),
            killed: r.verdict.killed,
            p_value: r.verdict.p_value,
            effect_size: r.verdict.effect_size,
            mean_acc_orig: r.verdict.mean_acc_orig,
            mean_acc_mut: r.verdict.mean_acc_mut,
        })
        .collect();

    // Dual faults: capped candidate list, each kill-checked once.
    let mut candidates = inject_multiple(&sweep.report);
    if let Some(cap) = cfg.max_multi_per_seed {
        if candidates.len() > cap {
            candidates.shuffle(&mut root.child("multi").child(&seed.id).rng());
            candidates.truncate(cap);
        }
    }
    let checked: Vec<Result<Option<(ModelConfig, KillVerdict)>>> = candidates
        .par_iter()
        .map(|ops| {
            let mutant = match apply_all(&seed.model, ops) {
                Ok(m) if m.train.validate(data.train.len()).is_ok() => m,
                _ => return Ok(None),
            };
            let accs = run_accuracies(&mutant, &data, cfg.kill.runs, kill_seed)?;
            Ok(Some((mutant, verdict(&sweep.baseline, &accs, &cfg.kill))))
        })
        .collect();

    let mut jobs: Vec<(String, Vec<u8>, Option<KillVerdict>, ModelConfig)> = Vec::new();
    for k in 0..cfg.correct_replicas {
        jobs.push((format!("{}-c{k}", seed.id), vec![CORRECT_LABEL], None, seed.model.clone()));
    }
    for (i, r) in sweep.killed().enumerate() {
        let mutant = apply_all(&seed.model, std::slice::from_ref(&r.op))?;
        jobs.push((format!("{}-s{i:03}", seed.id), vec![r.op.label()], Some(r.verdict), mutant));
    }
    let mut multi = (0, 0);
    for (i, (ops, outcome)) in candidates.iter().zip(checked).enumerate() {
        let Some((mutant, v)) = outcome? else { continue };
        multi.0 += 1;
        if v.killed {
            multi.1 += 1;
            jobs.push((format!("{}-m{i:03}", seed.id), labels_of(ops), Some(v), mutant));
        }
    }

    let trace_root = root.child("trace");
    let reps = cfg.trace_replicas;
    let traces: Vec<(usize, String)> = (0..jobs.len())
        .flat_map(|j| {
            let base = &jobs[j].0;
            (0..reps).map(move |r| (j, if reps == 1 { base.clone() } else { format!("{base}-r{r}") }))
        })
        .collect();
    let records = traces
        .into_par_iter()
        .map(|(j, id)| {
            let (mutant, labels, verdict, model) = &jobs[j];
            let features = featurize(model, &data.train, trace_root.child(&id), cfg.epochs, cfg.max_layers, cfg.probe)?;
            Ok(Pending {
                graph: export_graph(&model.spec),
                seed_id: seed.id.clone(),
                id,
                mutant: mutant.clone(),
                labels: labels.clone(),
                verdict: *verdict,
                features,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedOutput { records, stats, accuracy, multi })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Builds the corpus described by `cfg` into `out`. Seeds, grid points and
/// records run in parallel on the current rayon pool; every job draws from
/// its own derived seed, so the result does not depend on scheduling.
pub fn build_corpus(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ManifestRow>> {
    cfg.validate()?;
    let seeds = cfg.resolve_seeds()?;
    let root = SeedTree::new(cfg.seed);
    let outputs = seeds
        .par_iter()
        .map(|s| process_seed(s, cfg, root))
        .collect::<Result<Vec<_>>>()?;

    let pending: Vec<&Pending> = outputs.iter().flat_map(|o| &o.records).collect();
    // Split whole mutants so that trace replicas never straddle splits.
    let mut mutants: Vec<(&str, &[u8])> = pending.iter().map(|p| (p.mutant.as_str(), p.labels.as_slice())).collect();
    mutants.dedup();
    let keys: Vec<&[u8]> = mutants.iter().map(|m| m.1).collect();
    let by_mutant: BTreeMap<&str, usize> =
        mutants.iter().zip(stratified_split(&keys, cfg.splits, root.child("split"))).map(|(m, s)| (m.0, s)).collect();
    let split: Vec<usize> = pending.iter().map(|p| by_mutant[p.mutant.as_str()]).collect();
    let train_docs: Vec<GraphDoc> = pending
        .iter()
        .zip(&split)
        .filter(|(_, &s)| s == 0)
        .map(|(p, _)| p.graph.clone())
        .collect();
    let vocab = Vocab::fit(&train_docs)?;

    for sub in ["traces", "tokens", "graphs"] {
        create_dir(&out.join(sub))?;
    }
    let mut rows = Vec::with_capacity(pending.len());
    for (p, &s) in pending.iter().zip(&split) {
        let tokens = encode_and_pad(&p.graph, &vocab, cfg.seq_len)?;
        p.features.write_csv(&out.join("traces").join(format!("{}.csv", p.id)))?;
        tokens.write(&out.join("tokens").join(format!("{}.json", p.id)))?;
        p.graph.write(&out.join("graphs").join(format!("{}.json", p.id)))?;
        let (killed, p_value, effect_size) = verdict_fields(&p.verdict);
        rows.push(ManifestRow {
            mutant_id: p.id.clone(),
            seed_id: p.seed_id.clone(),
            labels: p.labels.clone(),
            killed,
            p_value,
            effect_size,
            split: SPLIT_NAMES[s].to_string(),
        });
    }
    vocab.write(&out.join("vocab.json"))?;
    write_manifest(&out.join("manifest.csv"), &rows)?;
    let summary = CorpusSummary {
        epochs: cfg.epochs,
        max_layers: cfg.max_layers,
        seq_len: cfg.seq_len,
        probe: cfg.probe,
        seeds: seeds.iter().map(|s| s.id.clone()).collect(),
        seed_accuracy: seeds.iter().zip(&outputs).map(|(s, o)| (s.id.clone(), o.accuracy)).collect(),
        single_fault: outputs.iter().flat_map(|o| o.stats.clone()).collect(),
        multi_checked: seeds.iter().zip(&outputs).map(|(s, o)| (s.id.clone(), o.multi)).collect(),
    };
    write_text(&out.join("summary.json"), &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    Ok(rows)
}

/// A corpus loaded back from disk.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub rows: Vec<ManifestRow>,
    pub samples: Vec<Sample>,
    pub vocab: Vocab,
    pub summary: CorpusSummary,
}

impl Corpus {
    pub fn load(dir: &Path) -> Result<Self> {
        let rows = read_manifest(&dir.join("manifest.csv"))?;
        let vocab = Vocab::read(&dir.join("vocab.json"))?;
        let path = dir.join("summary.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let summary: CorpusSummary = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let samples = rows
            .iter()
            .map(|r| {
                let features = FeatureMatrix::read_csv(&dir.join("traces").join(format!("{}.csv", r.mutant_id)))?;
                let tokens = TokenSequence::read(&dir.join("tokens").join(format!("{}.json", r.mutant_id)))?;
                if features.shape() != (summary.epochs, FeatureMatrix::width_for(summary.max_layers))
                    || tokens.len() != summary.seq_len
                {
                    return Err(Error::Config(format!("record {} does not match the corpus geometry", r.mutant_id)));
                }
                Ok(Sample { features, tokens, labels: r.labels.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus { dir: dir.to_path_buf(), rows, samples, vocab, summary })
    }

    /// Samples of one split, in manifest order.
    pub fn split(&self, name: &str) -> Vec<Sample> {
        self.rows
            .iter()
            .zip(&self.samples)
            .filter(|(r, _)| r.split == name)
            .map(|(_, s)| s.clone())
            .collect()
    }

    pub fn input_shape(&self) -> crate::localizer::InputShape {
        crate::localizer::InputShape {
            epochs: self.summary.epochs,
            features: FeatureMatrix::width_for(self.summary.max_layers),
            seq_len: self.summary.seq_len,
            vocab_size: self.vocab.size(),
        }
    }

    /// Records per kind: correct, single-fault, dual-fault.
    pub fn counts(&self) -> CorpusCounts {
        CorpusCounts::of(&self.rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub correct: usize,
    pub single: usize,
    pub multi: usize,
}

impl CorpusCounts {
    pub fn of(rows: &[ManifestRow]) -> Self {
        let mut c = CorpusCounts::default();
        for r in rows {
            match r.labels.as_slice() {
                [CORRECT_LABEL] => c.correct += 1,
                [_] => c.single += 1,
                _ => c.multi += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.correct + self.single + self.multi
    }
}

/// Fault categories that occur in at least one record.
pub fn categories_present(rows: &[ManifestRow]) -> Vec<Category> {
    let mut seen: Vec<Category> = rows.iter().flat_map(|r| r.labels.iter().filter_map(|&l| Category::from_label(l))).collect();
    seen.sort();
    seen.dedup();
    seen
}
