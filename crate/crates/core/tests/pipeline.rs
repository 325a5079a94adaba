use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use d4d::error::Error;
use d4d::mutator::manifest::manifest_to_string;
use d4d::mutator::read_manifest;
use d4d::pipeline::{build_corpus, run_experiment, Corpus, CorpusCounts, ExperimentConfig, SeedRef};

fn small() -> ExperimentConfig {
    ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/small.json")).unwrap()
}

fn stems(dir: &Path, ext: &str) -> BTreeSet<String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn manifest_reconciles_with_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let rows = build_corpus(&small(), tmp.path()).unwrap();
    assert!(!rows.is_empty());
    let ids: BTreeSet<String> = rows.iter().map(|r| r.mutant_id.clone()).collect();
    assert_eq!(ids.len(), rows.len());
    assert_eq!(stems(&tmp.path().join("traces"), "csv"), ids);
    assert_eq!(stems(&tmp.path().join("tokens"), "json"), ids);
    assert_eq!(stems(&tmp.path().join("graphs"), "json"), ids);
    // Correct records carry NaN statistics, so compare the serialized form.
    let back = read_manifest(&tmp.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest_to_string(&back).unwrap(), manifest_to_string(&rows).unwrap());
    for r in &rows {
        assert!(r.labels.windows(2).all(|w| w[0] < w[1]));
        assert!(r.labels.len() == 1 || r.killed, "{r:?}");
        assert!(r.mutant_id.starts_with(&r.seed_id));
    }
}

#[test]
fn splits_follow_ratios_and_keep_replicas_together() {
    let mut cfg = small();
    cfg.trace_replicas = 2;
    let tmp = tempfile::tempdir().unwrap();
    let rows = build_corpus(&cfg, tmp.path()).unwrap();
    let mut by_mutant: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in &rows {
        let mutant = r.mutant_id.rsplit_once("-r").unwrap().0.to_string();
        by_mutant.entry(mutant).or_default().insert(r.split.clone());
    }
    assert!(by_mutant.values().all(|s| s.len() == 1));
    let n = by_mutant.len() as f64;
    for (name, ratio) in ["train", "val", "test"].iter().zip(cfg.splits) {
        let k = by_mutant.values().filter(|s| s.contains(*name)).count() as f64;
        assert!((k - ratio * n).abs() <= 1.0, "{name}: {k} of {n}");
    }
}

#[test]
fn same_seed_gives_identical_corpus() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    build_corpus(&small(), a.path()).unwrap();
    build_corpus(&small(), b.path()).unwrap();
    for f in ["manifest.csv", "vocab.json", "summary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    for id in stems(&a.path().join("traces"), "csv") {
        let p = format!("traces/{id}.csv");
        assert_eq!(std::fs::read(a.path().join(&p)).unwrap(), std::fs::read(b.path().join(&p)).unwrap());
    }
    let mut other = small();
    other.seed = 43;
    let c = tempfile::tempdir().unwrap();
    build_corpus(&other, c.path()).unwrap();
    assert_ne!(std::fs::read(a.path().join("summary.json")).unwrap(), std::fs::read(c.path().join("summary.json")).unwrap());
}

#[test]
fn report_counts_match_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small();
    let rows = build_corpus(&cfg, tmp.path()).unwrap();
    let corpus = Corpus::load(tmp.path()).unwrap();
    let report = run_experiment(&corpus, cfg.classifier, &cfg.fit, 2, cfg.seed).unwrap();
    assert_eq!(report.counts, CorpusCounts::of(&rows));
    assert_eq!(report.runs.len(), 2);
    let mean = (report.runs[0].test.accuracy + report.runs[1].test.accuracy) / 2.0;
    assert!((report.mean.test.accuracy - mean).abs() < 1e-12);
    assert_eq!(report.split_sizes.values().sum::<usize>(), rows.len());
    let steps = cfg.classifier.steps;
    let confusion_total: usize = report.confusion.iter().flatten().sum();
    assert_eq!(confusion_total, 2 * report.split_sizes["test"] * steps);
    let kills: usize = report.kill_rates.iter().map(|k| k.killed).sum();
    assert_eq!(kills, corpus.summary.single_fault.iter().filter(|s| s.killed).count());
    assert!(report.to_text().contains("0.9415"));
}

#[test]
fn weak_seed_aborts_corpus_build() {
    let mut cfg = small();
    let mut seed = SeedRef::Named("blobs_softmax".into()).resolve(cfg.epochs).unwrap();
    seed.id = "stalled".into();
    seed.model.train.lr = 1e-9;
    cfg.seeds = vec![SeedRef::Inline(Box::new(seed))];
    let tmp = tempfile::tempdir().unwrap();
    let err = build_corpus(&cfg, tmp.path()).unwrap_err();
    assert!(matches!(err, Error::BelowAccuracyFloor { .. }), "{err}");
    assert!(err.to_string().contains("stalled"));
}

#[test]
fn corpus_rejects_mismatched_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    build_corpus(&small(), tmp.path()).unwrap();
    let path = tmp.path().join("summary.json");
    let text = std::fs::read_to_string(&path).unwrap().replacen("\"epochs\": 8", "\"epochs\": 9", 1);
    std::fs::write(&path, text).unwrap();
    assert!(Corpus::load(tmp.path()).is_err());
}
