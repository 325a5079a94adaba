use d4d::nn::{
    train, Activation, Dataset, Initializer, LayerSpec, LossKind, Model, ModelSpec, OptimizerKind,
    Tensor, TrainConfig,
};
use d4d::pipeline::tasks;
use d4d::rng::SeedTree;
use d4d::Error;

fn spec(input: &[usize], layers: Vec<LayerSpec>) -> ModelSpec {
    ModelSpec { input_shape: input.to_vec(), layers }
}

#[test]
fn zeros_initializer_gives_zero_parameters() {
    let s = spec(
        &[3],
        vec![LayerSpec::Dense { units: 4, activation: Activation::Linear, init: Initializer::Zeros }],
    );
    let model = Model::build(&s, 1).unwrap();
    let params: Vec<_> = model.params().collect();
    assert_eq!(params[0].value.shape(), &[3, 4]);
    assert_eq!(params[1].value.shape(), &[4]);
    assert!(params.iter().all(|p| p.value.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn same_seed_same_parameter_bytes() {
    let s = spec(&[8, 8, 1], vec![LayerSpec::conv2d(4, 3, Activation::Relu), LayerSpec::Flatten, LayerSpec::dense(3, Activation::Softmax)]);
    let a = Model::build(&s, 77).unwrap().state_vector();
    let b = Model::build(&s, 77).unwrap().state_vector();
    let c = Model::build(&s, 78).unwrap().state_vector();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_ne!(a, c);
}

#[test]
fn conv_after_flatten_is_rejected_at_that_index() {
    let s = spec(&[6, 6, 1], vec![LayerSpec::Flatten, LayerSpec::conv2d(2, 3, Activation::Relu)]);
    match Model::build(&s, 0) {
        Err(Error::Shape { index, .. }) => assert_eq!(index, 1),
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn identity_dense_passes_input_through() {
    let s = spec(
        &[3],
        vec![LayerSpec::Dense { units: 3, activation: Activation::Linear, init: Initializer::Zeros }],
    );
    let mut model = Model::build(&s, 0).unwrap();
    let kernel = &mut model.layers_mut()[0].params_mut()[0].value;
    for i in 0..3 {
        kernel.data_mut()[i * 3 + i] = 1.0;
    }
    let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, 4.0, -1.0]).unwrap();
    assert_eq!(model.forward(&x, false).unwrap().output(), &x);
}

#[test]
fn softmax_rows_sum_to_one() {
    let s = spec(&[4], vec![LayerSpec::dense(16, Activation::Tanh), LayerSpec::dense(7, Activation::Softmax)]);
    let mut model = Model::build(&s, 3).unwrap();
    let mut x = Tensor::zeros(&[5, 4]);
    for (i, v) in x.data_mut().iter_mut().enumerate() {
        *v = (i as f64 * 0.77).sin() * 10.0;
    }
    let out = model.forward(&x, false).unwrap().output().clone();
    for r in 0..5 {
        assert!((out.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn dropout_is_inactive_in_eval_mode() {
    let layers = vec![LayerSpec::dense(8, Activation::Relu), LayerSpec::dense(3, Activation::Softmax)];
    let mut with = layers.clone();
    with.push(LayerSpec::Dropout { rate: 0.5 });
    let mut plain = Model::build(&spec(&[4], layers), 9).unwrap();
    let mut dropped = Model::build(&spec(&[4], with), 9).unwrap();
    let x = Tensor::new(vec![2, 4], vec![0.1, 0.2, 0.3, 0.4, -1.0, 0.5, 2.0, 0.0]).unwrap();
    let a = plain.forward(&x, false).unwrap().output().clone();
    let b = dropped.forward(&x, false).unwrap().output().clone();
    assert_eq!(a, b);
    assert_ne!(dropped.forward(&x, true).unwrap().output(), &a);
}

#[test]
fn non_finite_input_names_the_row() {
    let mut model = Model::build(&spec(&[2], vec![LayerSpec::dense(2, Activation::Softmax)]), 0).unwrap();
    let x = Tensor::new(vec![3, 2], vec![0.0, 1.0, 2.0, 3.0, f64::NAN, 0.0]).unwrap();
    match model.forward(&x, true) {
        Err(Error::NonFiniteInput { index }) => assert_eq!(index, 2),
        other => panic!("expected non-finite error, got {other:?}"),
    }
}

#[test]
fn batch_norm_on_constant_input_stays_finite() {
    let s = spec(&[3], vec![LayerSpec::BatchNorm, LayerSpec::dense(2, Activation::Softmax)]);
    let mut model = Model::build(&s, 0).unwrap();
    let x = Tensor::full(&[4, 3], 2.5);
    let y = Tensor::new(vec![4, 2], vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
    assert!(model.forward(&x, true).unwrap().output().all_finite());
    model.backward(LossKind::CategoricalCrossentropy, &y);
    assert!(model.params().all(|p| p.grad.all_finite()));
}

#[test]
fn eval_mode_is_parameter_only() {
    let s = spec(&[3], vec![LayerSpec::BatchNorm, LayerSpec::Dropout { rate: 0.3 }, LayerSpec::dense(2, Activation::Softmax)]);
    let model = Model::build(&s, 4).unwrap();
    let x = Tensor::new(vec![2, 3], vec![0.5, 1.0, -1.0, 2.0, 0.0, 0.25]).unwrap();
    assert_eq!(model.predict(&x).unwrap(), model.predict(&x).unwrap());
}

struct Counter(usize, usize);

impl d4d::nn::TrainObserver for Counter {
    fn on_batch(&mut self, _: &Model, _: &d4d::nn::ForwardPass) {
        self.0 += 1;
    }
    fn on_epoch_end(&mut self, _: usize, _: &Model, _: &d4d::nn::EpochMetrics) {
        self.1 += 1;
    }
}

fn blobs2() -> Dataset {
    tasks::blobs(200, 2, 0.5, SeedTree::new(5)).unwrap()
}

#[test]
fn full_batch_epoch_takes_one_step() {
    let data = blobs2();
    let mut model = Model::build(&spec(&[2], vec![LayerSpec::dense(2, Activation::Softmax)]), 1).unwrap();
    let cfg = TrainConfig::new(LossKind::CategoricalCrossentropy, OptimizerKind::Sgd, 0.1, data.len(), 1);
    let mut counter = Counter(0, 0);
    let hist = train(&mut model, &data, &cfg, &mut counter).unwrap();
    assert_eq!(hist[0].steps, 1);
    assert_eq!((counter.0, counter.1), (1, 1));
}

#[test]
fn fixed_seed_gives_identical_loss_curves() {
    let data = blobs2();
    let s = spec(&[2], vec![LayerSpec::dense(8, Activation::Relu), LayerSpec::Dropout { rate: 0.2 }, LayerSpec::dense(2, Activation::Softmax)]);
    let cfg = TrainConfig::new(LossKind::CategoricalCrossentropy, OptimizerKind::Adam, 0.01, 16, 5);
    let run = || {
        let mut m = Model::build(&s, 2).unwrap();
        let h = train(&mut m, &data, &cfg, &mut ()).unwrap();
        (h.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>(), m.state_vector())
    };
    assert_eq!(run(), run());
}

#[test]
fn separable_blobs_reach_high_accuracy() {
    let data = blobs2();
    let (tr, te) = data.split(0.8, SeedTree::new(1));
    let mut model = Model::build(&spec(&[2], vec![LayerSpec::dense(8, Activation::Relu), LayerSpec::dense(2, Activation::Softmax)]), 3).unwrap();
    let cfg = TrainConfig::new(LossKind::CategoricalCrossentropy, OptimizerKind::Sgd, 0.1, 16, 20);
    train(&mut model, &tr, &cfg, &mut ()).unwrap();
    let (_, acc) = model.evaluate(te.x(), te.y(), cfg.loss).unwrap();
    assert!(acc >= 0.95, "test accuracy {acc}");
}

#[test]
fn divergence_does_not_abort() {
    let data = blobs2();
    let mut model = Model::build(&spec(&[2], vec![LayerSpec::dense(8, Activation::Relu), LayerSpec::dense(2, Activation::Softmax)]), 3).unwrap();
    let cfg = TrainConfig::new(LossKind::Mse, OptimizerKind::Sgd, 1e6, 16, 3);
    let hist = train(&mut model, &data, &cfg, &mut ()).unwrap();
    assert_eq!(hist.len(), 3);
}
