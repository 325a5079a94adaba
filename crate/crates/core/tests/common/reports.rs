use d4d::mutator::{Category, KilledReport, MutationOp};
use d4d::nn::{Activation, Initializer, LossKind, OptimizerKind};

/// Operator of category `c`, distinguished by `k`.
pub fn op_of(c: Category, k: usize) -> MutationOp {
    let x = k as f64 + 1.0;
    match c {
        Category::ChangeLossFunction => MutationOp::ChangeLossFunction { loss: [LossKind::Mse, LossKind::BinaryCrossentropy][k % 2] },
        Category::ChangeBatchSize => MutationOp::ChangeBatchSize { batch_size: k + 1 },
        Category::ChangeLearningRate => MutationOp::ChangeLearningRate { lr: x },
        Category::ChangeActivationFunction => MutationOp::ChangeActivationFunction { layer: Some(k), activation: Activation::Tanh },
        Category::AddActivationFunction => MutationOp::AddActivationFunction { layer: Some(k), activation: Activation::Relu },
        Category::RemoveActivationFunction => MutationOp::RemoveActivationFunction { layer: Some(k) },
        Category::ChangeOptimisationFunction => MutationOp::ChangeOptimisationFunction { optimizer: OptimizerKind::Sgd },
        Category::ChangeGradientClip => MutationOp::ChangeGradientClip { clip: x },
        Category::ChangeWeightsInitialisation => {
            MutationOp::ChangeWeightsInitialisation { layer: Some(k), init: Initializer::Normal { stddev: x } }
        }
        Category::ChangeDropoutRate => MutationOp::ChangeDropoutRate { layer: Some(k), rate: 0.1 },
    }
}

/// Flattens the report and counts every unordered pair whose members come
/// from different categories.
pub fn brute_force_pairs(report: &KilledReport) -> Vec<Vec<u8>> {
    let all: Vec<&MutationOp> = report.values().flatten().collect();
    let mut out = Vec::new();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            if all[i].category() != all[j].category() {
                let mut l = vec![all[i].label(), all[j].label()];
                l.sort_unstable();
                out.push(l);
            }
        }
    }
    out.sort();
    out
}
