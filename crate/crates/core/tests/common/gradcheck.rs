//! Central finite-difference oracle for model gradients.

use d4d::nn::{loss, LossKind, Model, Tensor};
use d4d::rng::SeedTree;
use rand::Rng;

pub const STEP: f64 = 1e-5;
/// Denominator floor so that near-zero gradient pairs are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn loss_at(model: &mut Model, x: &Tensor, y: &Tensor, kind: LossKind, dropout: SeedTree) -> f64 {
    let pass = model.forward_seeded(x, true, dropout).unwrap();
    loss::loss_value(kind, pass.output(), y)
}

/// Compares analytic parameter (and, when `check_input`, input) gradients
/// with central differences at `probes` random coordinates of each kind.
/// Returns the maximum relative error seen.
pub fn max_rel_error(
    model: &mut Model,
    x: &Tensor,
    y: &Tensor,
    kind: LossKind,
    probes: usize,
    seed: u64,
    check_input: bool,
) -> f64 {
    let dropout = SeedTree::new(seed).child("dropout");
    model.forward_seeded(x, true, dropout).unwrap();
    let back = model.backward(kind, y);
    let mut coords = Vec::new();
    for (li, layer) in model.layers().iter().enumerate() {
        for (pi, p) in layer.params().iter().enumerate() {
            for e in 0..p.value.len() {
                coords.push((li, pi, e, p.grad.data()[e]));
            }
        }
    }
    let mut rng = SeedTree::new(seed).child("probes").rng();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let (li, pi, e, analytic) = coords[rng.random_range(0..coords.len())];
        let eval = |delta: f64, m: &mut Model| {
            m.layers_mut()[li].params_mut()[pi].value.data_mut()[e] += delta;
            let l = loss_at(m, x, y, kind, dropout);
            m.layers_mut()[li].params_mut()[pi].value.data_mut()[e] -= delta;
            l
        };
        let numeric = (eval(STEP, model) - eval(-STEP, model)) / (2.0 * STEP);
        worst = worst.max(rel_error(analytic, numeric));
    }
    if check_input {
        for _ in 0..probes {
            let e = rng.random_range(0..x.len());
            let analytic = back.input_grad.data()[e];
            let mut xp = x.clone();
            xp.data_mut()[e] += STEP;
            let lp = loss_at(model, &xp, y, kind, dropout);
            xp.data_mut()[e] -= 2.0 * STEP;
            let lm = loss_at(model, &xp, y, kind, dropout);
            worst = worst.max(rel_error(analytic, (lp - lm) / (2.0 * STEP)));
        }
    }
    worst
}

pub fn random_tensor(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = SeedTree::new(seed).rng();
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// One-hot targets over the last axis with random classes.
pub fn random_one_hot(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = SeedTree::new(seed).rng();
    let c = *shape.last().unwrap();
    let rows = shape.iter().product::<usize>() / c;
    let mut data = vec![0.0; rows * c];
    for r in 0..rows {
        data[r * c + rng.random_range(0..c)] = 1.0;
    }
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn random_ids(shape: &[usize], vocab: usize, seed: u64) -> Tensor {
    let mut rng = SeedTree::new(seed).rng();
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(0..vocab) as f64).collect()).unwrap()
}

use d4d::nn::{Activation, Initializer, LayerSpec, ModelSpec};

pub struct Case {
    pub name: String,
    pub model: Model,
    pub x: Tensor,
    pub y: Tensor,
    pub loss: LossKind,
    pub check_input: bool,
}

fn case(name: &str, input: &[usize], layers: Vec<LayerSpec>, loss: LossKind, seed: u64) -> Case {
    let spec = ModelSpec {
        input_shape: input.to_vec(),
        layers,
    };
    let model = Model::build(&spec, seed).unwrap();
    let n = 3;
    let mut xshape = vec![n];
    xshape.extend_from_slice(input);
    let mut yshape = vec![n];
    yshape.extend_from_slice(model.output_shape());
    Case {
        name: name.to_string(),
        model,
        x: random_tensor(&xshape, -1.0, 1.0, seed + 1),
        y: random_one_hot(&yshape, seed + 2),
        loss,
        check_input: true,
    }
}

fn dense(units: usize, act: Activation) -> LayerSpec {
    LayerSpec::dense(units, act)
}

/// One small network per layer kind, activation and loss.
pub fn engine_cases() -> Vec<Case> {
    use Activation::*;
    use LossKind::*;
    let mut cases = vec![
        case("dense_relu_softmax_cce", &[4], vec![dense(5, Relu), dense(3, Softmax)], CategoricalCrossentropy, 11),
        case("dense_tanh_linear_mse", &[4], vec![dense(5, Tanh), dense(3, Linear)], Mse, 12),
        case("dense_sigmoid_bce", &[4], vec![dense(5, None), dense(3, Sigmoid)], BinaryCrossentropy, 13),
        case("softmax_mse", &[3], vec![dense(4, Sigmoid), dense(3, Softmax)], Mse, 14),
        case("softmax_bce", &[3], vec![dense(4, Relu), dense(3, Softmax)], BinaryCrossentropy, 15),
        case(
            "activation_layer",
            &[3],
            vec![dense(4, None), LayerSpec::Activation { activation: Tanh }, dense(2, Softmax)],
            CategoricalCrossentropy,
            16,
        ),
        case(
            "conv_pool_flatten",
            &[6, 6, 2],
            vec![
                LayerSpec::conv2d(3, 3, Tanh),
                LayerSpec::MaxPool2d { pool: 2 },
                LayerSpec::conv2d(2, 2, Relu),
                LayerSpec::Flatten,
                dense(3, Softmax),
            ],
            CategoricalCrossentropy,
            17,
        ),
        case(
            "conv_rect_kernel",
            &[5, 4, 1],
            vec![
                LayerSpec::Conv2d { filters: 2, kernel: [2, 3], activation: Sigmoid, init: Initializer::HeUniform },
                LayerSpec::Flatten,
                dense(2, Linear),
            ],
            Mse,
            18,
        ),
        case(
            "dropout",
            &[5],
            vec![dense(6, Tanh), LayerSpec::Dropout { rate: 0.4 }, dense(3, Softmax)],
            CategoricalCrossentropy,
            19,
        ),
        case(
            "batch_norm",
            &[4],
            vec![dense(5, None), LayerSpec::BatchNorm, dense(5, Tanh), dense(3, Softmax)],
            CategoricalCrossentropy,
            20,
        ),
        case(
            "batch_norm_images",
            &[4, 4, 2],
            vec![LayerSpec::BatchNorm, LayerSpec::conv2d(2, 3, Relu), LayerSpec::Flatten, dense(2, Sigmoid)],
            BinaryCrossentropy,
            21,
        ),
        case(
            "lstm_stack",
            &[4, 3],
            vec![
                LayerSpec::Lstm { units: 4, return_sequences: true, init: Initializer::GlorotUniform },
                LayerSpec::Lstm { units: 3, return_sequences: false, init: Initializer::GlorotUniform },
                dense(2, Softmax),
            ],
            CategoricalCrossentropy,
            22,
        ),
        case(
            "repeat_lstm_time_distributed",
            &[3],
            vec![
                dense(4, Tanh),
                LayerSpec::RepeatVector { repeat: 2 },
                LayerSpec::Lstm { units: 5, return_sequences: true, init: Initializer::GlorotUniform },
                LayerSpec::TimeDistributedDense { units: 4, activation: Tanh, init: Initializer::GlorotUniform },
                LayerSpec::Lstm { units: 3, return_sequences: true, init: Initializer::GlorotUniform },
                LayerSpec::TimeDistributedDense { units: 3, activation: Softmax, init: Initializer::GlorotUniform },
            ],
            CategoricalCrossentropy,
            23,
        ),
        case(
            "normal_init_tanh_mse",
            &[3],
            vec![
                LayerSpec::Dense { units: 4, activation: Tanh, init: Initializer::Normal { stddev: 0.5 } },
                dense(2, Linear),
            ],
            Mse,
            24,
        ),
    ];
    // Embedding inputs are ids, so only parameters are probed.
    let spec = ModelSpec {
        input_shape: vec![5],
        layers: vec![
            LayerSpec::Embedding { vocab: 7, dim: 3, init: Initializer::GlorotUniform },
            LayerSpec::Lstm { units: 4, return_sequences: false, init: Initializer::GlorotUniform },
            dense(3, Softmax),
        ],
    };
    cases.push(Case {
        name: "embedding_lstm".into(),
        model: Model::build(&spec, 25).unwrap(),
        x: random_ids(&[3, 5], 7, 26),
        y: random_one_hot(&[3, 3], 27),
        loss: CategoricalCrossentropy,
        check_input: false,
    });
    cases
}
