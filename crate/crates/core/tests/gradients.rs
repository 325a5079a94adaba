mod common;

use common::gradcheck::{engine_cases, max_rel_error};
use d4d::nn::{loss, Activation, LayerSpec, LossKind, Model, ModelSpec, Tensor};

#[test]
fn every_layer_kind_matches_finite_differences() {
    for mut case in engine_cases() {
        let err = max_rel_error(&mut case.model, &case.x, &case.y, case.loss, 25, 3, case.check_input);
        assert!(err <= 1e-4, "{}: max relative error {err:e}", case.name);
    }
}

#[test]
fn softmax_cross_entropy_gradient_is_p_minus_y() {
    let spec = ModelSpec {
        input_shape: vec![3],
        layers: vec![LayerSpec::dense(4, Activation::Softmax)],
    };
    let mut model = Model::build(&spec, 1).unwrap();
    let x = Tensor::new(vec![2, 3], vec![0.3, -0.2, 0.8, -1.0, 0.5, 0.1]).unwrap();
    let y = Tensor::new(vec![2, 4], vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let pass = model.forward(&x, true).unwrap();
    let p = pass.output().clone();
    let mut g = loss::loss_grad(LossKind::CategoricalCrossentropy, &p, &y);
    d4d::nn::activation::backward(Activation::Softmax, &p, &mut g);
    for ((gv, pv), yv) in g.data().iter().zip(p.data()).zip(y.data()) {
        // loss is averaged over the 2 rows
        assert!((gv - (pv - yv) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn zero_loss_gives_zero_gradients() {
    let spec = ModelSpec {
        input_shape: vec![3],
        layers: vec![LayerSpec::dense(4, Activation::Tanh), LayerSpec::dense(2, Activation::Linear)],
    };
    let mut model = Model::build(&spec, 5).unwrap();
    let x = Tensor::new(vec![2, 3], vec![0.1, 0.2, 0.3, -0.4, 0.5, 0.6]).unwrap();
    let y = model.forward(&x, true).unwrap().output().clone();
    let back = model.backward(LossKind::Mse, &y);
    assert_eq!(back.loss, 0.0);
    assert!(model.params().all(|p| p.grad.data().iter().all(|&g| g == 0.0)));
}
