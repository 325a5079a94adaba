mod common;

use common::gradcheck::rel_error;
use d4d::graph::{pad, Vocab};
use d4d::localizer::{
    evaluate, label_steps, score, train_classifier, Batchable, Classifier, ClassifierSpec, FitOptions,
    InputShape, Localizer, Sample,
};
use d4d::nn::loss::{loss_grad, loss_value};
use d4d::nn::LossKind;
use d4d::probe::{FeatureMatrix, ProbeConfig};
use d4d::rng::SeedTree;
use rand::Rng;

const EPOCHS: usize = 4;
const MAX_LAYERS: usize = 1;
const SEQ: usize = 6;
const VOCAB: usize = 8;

fn shape() -> InputShape {
    InputShape {
        epochs: EPOCHS,
        features: FeatureMatrix::width_for(MAX_LAYERS),
        seq_len: SEQ,
        vocab_size: VOCAB,
    }
}

fn tiny() -> ClassifierSpec {
    ClassifierSpec { h1: 6, h2: 5, h3: 4, h4: 5, dense_units: 4, embed_dim: 3, ..ClassifierSpec::default() }
}

fn sample(seed: u64, labels: Vec<u8>) -> Sample {
    let mut rng = SeedTree::new(seed).rng();
    let w = FeatureMatrix::width_for(MAX_LAYERS);
    // Per-class offset so labels are learnable from the trace.
    let shift = labels.iter().map(|&l| l as f64).sum::<f64>();
    let data = (0..EPOCHS * w).map(|i| rng.random_range(-1.0..1.0) + shift * ((i % 7) as f64 - 3.0)).collect();
    let ids: Vec<u32> = (0..rng.random_range(2..=SEQ)).map(|_| rng.random_range(1..VOCAB as u32)).collect();
    Sample {
        features: FeatureMatrix::from_rows(EPOCHS, MAX_LAYERS, data).unwrap(),
        tokens: pad(&ids, SEQ).unwrap(),
        labels,
    }
}

fn batch(n: usize) -> Vec<Sample> {
    let sets: [&[u8]; 5] = [&[0], &[1], &[3], &[1, 7], &[2, 9]];
    (0..n).map(|i| sample(100 + i as u64, sets[i % sets.len()].to_vec())).collect()
}

#[test]
fn fresh_classifier_emits_normalized_steps() {
    let clf = Classifier::build(ClassifierSpec::default(), shape(), 3).unwrap();
    let data = Batchable::new(&batch(4), 2).unwrap();
    let out = clf.predict_batch(&data.traces, &data.tokens).unwrap();
    assert_eq!(out.shape(), &[4, 2, 11]);
    for row in out.data().chunks(11) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert_eq!(clf.layer_count(), 14);
}

#[test]
fn same_seed_same_parameters() {
    let a = Classifier::build(tiny(), shape(), 11).unwrap();
    let b = Classifier::build(tiny(), shape(), 11).unwrap();
    let c = Classifier::build(tiny(), shape(), 12).unwrap();
    assert_eq!(a.state_vector(), b.state_vector());
    assert_ne!(a.state_vector(), c.state_vector());
}

#[test]
fn prediction_is_deterministic_and_shape_checked() {
    let clf = Classifier::build(tiny(), shape(), 5).unwrap();
    let s = sample(1, vec![0]);
    let d1 = clf.predict(&s.features, &s.tokens).unwrap();
    let d2 = clf.predict(&s.features, &s.tokens).unwrap();
    assert_eq!(d1, d2);
    assert_eq!(d1.steps.len(), 2);
    let wrong = FeatureMatrix::zeros(EPOCHS + 1, MAX_LAYERS);
    assert!(clf.predict(&wrong, &s.tokens).is_err());
}

#[test]
fn full_classifier_gradients_match_finite_differences() {
    let spec = ClassifierSpec { dropout: 0.0, ..tiny() };
    let mut clf = Classifier::build(spec, shape(), 21).unwrap();
    let samples = batch(3);
    let data = Batchable::new(&samples, 2).unwrap();
    let (mean, var) = d4d::localizer::training::feature_stats(&data.traces);
    clf.set_normalization(mean, var);
    let target = d4d::localizer::metrics::step_targets(&data.steps, 11);
    let kind = LossKind::CategoricalCrossentropy;
    let seed = SeedTree::new(0);

    let out = clf.forward(&data.traces, &data.tokens, true, Some(seed)).unwrap();
    clf.backward(loss_grad(kind, &out, &target));
    let analytic: Vec<f64> = clf.params().flat_map(|p| p.grad.data().to_vec()).collect();
    let mut rng = SeedTree::new(9).rng();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let k = rng.random_range(0..analytic.len());
        let mut at = |delta: f64| {
            nudge(&mut clf, k, delta);
            let o = clf.forward(&data.traces, &data.tokens, true, Some(seed)).unwrap();
            nudge(&mut clf, k, -delta);
            loss_value(kind, &o, &target)
        };
        let numeric = (at(h) - at(-h)) / (2.0 * h);
        worst = worst.max(rel_error(analytic[k], numeric));
    }
    assert!(worst <= 1e-4, "max relative error {worst}");
}

fn nudge(clf: &mut Classifier, mut k: usize, delta: f64) {
    for p in clf.params_mut() {
        if k < p.value.len() {
            p.value.data_mut()[k] += delta;
            return;
        }
        k -= p.value.len();
    }
}

#[test]
fn memorizes_a_small_corpus() {
    let train = batch(20);
    let opts = FitOptions { epochs: 120, batch_size: 5, lr: 1e-2, keep_best: false };
    let spec = ClassifierSpec { h1: 16, h2: 16, h3: 16, h4: 16, dense_units: 16, embed_dim: 8, dropout: 0.0, ..Default::default() };
    let (clf, history) = train_classifier(spec, shape(), &train, &[], &opts, 4).unwrap();
    let first = history.epochs[0].loss;
    let last = history.epochs.last().unwrap().loss;
    assert!(last < first, "loss {first} -> {last}");
    let s = evaluate(&clf, &Batchable::new(&train, 2).unwrap()).unwrap();
    assert!(s.accuracy >= 0.95, "train accuracy {}", s.accuracy);
}

#[test]
fn validation_scores_use_only_the_validation_rows() {
    let all = batch(15);
    let (train, val) = all.split_at(10);
    let opts = FitOptions { epochs: 3, batch_size: 4, ..Default::default() };
    let (clf, history) = train_classifier(tiny(), shape(), train, val, &opts, 8).unwrap();
    assert_eq!(history.epochs.len(), 3);
    let expected = evaluate(&clf, &Batchable::new(val, 2).unwrap()).unwrap();
    assert_eq!(history.epochs[history.selected_epoch].val.unwrap(), expected);
}

#[test]
fn training_is_deterministic() {
    let train = batch(10);
    let opts = FitOptions { epochs: 2, batch_size: 4, ..Default::default() };
    let (a, _) = train_classifier(tiny(), shape(), &train, &[], &opts, 1).unwrap();
    let (b, _) = train_classifier(tiny(), shape(), &train, &[], &opts, 1).unwrap();
    assert_eq!(a.state_vector(), b.state_vector());
}

#[test]
fn single_class_corpus_still_trains() {
    let train: Vec<Sample> = (0..6).map(|i| sample(i, vec![0])).collect();
    let opts = FitOptions { epochs: 2, batch_size: 3, ..Default::default() };
    assert!(train_classifier(tiny(), shape(), &train, &[], &opts, 1).is_ok());
}

#[test]
fn score_examples() {
    let s = score(&[label_steps(&[1], 2).unwrap()], &[label_steps(&[1, 7], 2).unwrap()]).unwrap();
    assert_eq!((s.precision, s.recall), (1.0, 0.5));
    assert!(score(&[], &[]).is_err());
    // Label order in the truth does not change the encoding.
    assert_eq!(label_steps(&[7, 1], 2).unwrap(), label_steps(&[1, 7], 2).unwrap());
}

fn localizer() -> Localizer {
    let vocab = Vocab::from_json(r#"{"Gemm":2,"Relu":3,"Softmax":4,"Conv":5,"MaxPool":6,"Flatten":7,"__oov__":1}"#).unwrap();
    Localizer {
        classifier: Classifier::build(tiny(), shape(), 2).unwrap(),
        vocab,
        max_layers: MAX_LAYERS,
        probe: ProbeConfig::default(),
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let loc = localizer();
    let bytes = d4d::localizer::checkpoint::to_bytes(&loc);
    assert!(bytes.starts_with(b"D4DCKPT1\n"));
    let back = d4d::localizer::checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.classifier.state_vector(), loc.classifier.state_vector());
    assert_eq!(back.vocab, loc.vocab);
    assert_eq!(d4d::localizer::checkpoint::to_bytes(&back), bytes);
    let s = sample(3, vec![0]);
    assert_eq!(back.classifier.predict(&s.features, &s.tokens).unwrap(), loc.classifier.predict(&s.features, &s.tokens).unwrap());
}

#[test]
fn corrupted_checkpoints_are_rejected_with_a_version_message() {
    let bytes = d4d::localizer::checkpoint::to_bytes(&localizer());
    let mut wrong_magic = bytes.clone();
    wrong_magic[7] = b'9';
    let err = d4d::localizer::checkpoint::from_bytes(&wrong_magic).unwrap_err().to_string();
    assert!(err.contains("D4DCKPT1") && err.contains("version"), "{err}");
    assert!(d4d::localizer::checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
}
