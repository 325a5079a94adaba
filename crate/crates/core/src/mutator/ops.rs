use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Initializer, LayerSpec, LossKind, ModelConfig, OptimizerKind};

/// Class id of a model with no injected fault.
pub const CORRECT_LABEL: u8 = 0;
/// Number of classes including the correct-model class.
pub const NUM_CLASSES: usize = 11;

/// The ten fault categories, numbered by their class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ChangeLossFunction = 1,
    ChangeBatchSize = 2,
    ChangeLearningRate = 3,
    ChangeActivationFunction = 4,
    AddActivationFunction = 5,
    RemoveActivationFunction = 6,
    ChangeOptimisationFunction = 7,
    ChangeGradientClip = 8,
    ChangeWeightsInitialisation = 9,
    ChangeDropoutRate = 10,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::ChangeLossFunction,
        Category::ChangeBatchSize,
        Category::ChangeLearningRate,
        Category::ChangeActivationFunction,
        Category::AddActivationFunction,
        Category::RemoveActivationFunction,
        Category::ChangeOptimisationFunction,
        Category::ChangeGradientClip,
        Category::ChangeWeightsInitialisation,
        Category::ChangeDropoutRate,
    ];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Option<Category> {
        Category::ALL.get((label as usize).checked_sub(1)?).copied()
    }

    /// Operator name as used in mutation-testing tables.
    pub fn operator_name(self) -> &'static str {
        match self {
            Category::ChangeLossFunction => "Change_Loss_Function",
            Category::ChangeBatchSize => "Change_Batch_Size",
            Category::ChangeLearningRate => "Change_Learning_Rate",
            Category::ChangeActivationFunction => "Change_Activation_Function",
            Category::AddActivationFunction => "Add_Activation_Function",
            Category::RemoveActivationFunction => "Remove_Activation_Function",
            Category::ChangeOptimisationFunction => "Change_Optimisation_Function",
            Category::ChangeGradientClip => "Change_Gradient_Clip",
            Category::ChangeWeightsInitialisation => "Change_Weights_Initialisation",
            Category::ChangeDropoutRate => "Change_Dropout_Rate",
        }
    }

    /// Short human-readable root-cause description.
    pub fn description(self) -> &'static str {
        match self {
            Category::ChangeLossFunction => "loss function",
            Category::ChangeBatchSize => "batch size",
            Category::ChangeLearningRate => "learning rate",
            Category::ChangeActivationFunction => "activation function",
            Category::AddActivationFunction => "added activation function",
            Category::RemoveActivationFunction => "removed activation function",
            Category::ChangeOptimisationFunction => "optimizer",
            Category::ChangeGradientClip => "gradient clip",
            Category::ChangeWeightsInitialisation => "weights initialisation",
            Category::ChangeDropoutRate => "dropout rate",
        }
    }
}

/// Description of class `label`, including the correct-model class.
pub fn class_description(label: u8) -> &'static str {
    Category::from_label(label).map_or("no fault", Category::description)
}

/// Operator-table name of class `label`.
pub fn class_name(label: u8) -> &'static str {
    Category::from_label(label).map_or("Correct_Model", Category::operator_name)
}

/// One concrete mutation. Layer-targeted operators take an explicit layer
/// index or, when `layer` is absent, the first applicable layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum MutationOp {
    ChangeLossFunction {
        loss: LossKind,
    },
    ChangeBatchSize {
        batch_size: usize,
    },
    ChangeLearningRate {
        lr: f64,
    },
    ChangeActivationFunction {
        #[serde(default)]
        layer: Option<usize>,
        activation: Activation,
    },
    AddActivationFunction {
        #[serde(default)]
        layer: Option<usize>,
        activation: Activation,
    },
    RemoveActivationFunction {
        #[serde(default)]
        layer: Option<usize>,
    },
    ChangeOptimisationFunction {
        optimizer: OptimizerKind,
    },
    ChangeGradientClip {
        clip: f64,
    },
    ChangeWeightsInitialisation {
        #[serde(default)]
        layer: Option<usize>,
        init: Initializer,
    },
    ChangeDropoutRate {
        #[serde(default)]
        layer: Option<usize>,
        rate: f64,
    },
}

impl MutationOp {
    pub fn category(&self) -> Category {
        match self {
            MutationOp::ChangeLossFunction { .. } => Category::ChangeLossFunction,
            MutationOp::ChangeBatchSize { .. } => Category::ChangeBatchSize,
            MutationOp::ChangeLearningRate { .. } => Category::ChangeLearningRate,
            MutationOp::ChangeActivationFunction { .. } => Category::ChangeActivationFunction,
            MutationOp::AddActivationFunction { .. } => Category::AddActivationFunction,
            MutationOp::RemoveActivationFunction { .. } => Category::RemoveActivationFunction,
            MutationOp::ChangeOptimisationFunction { .. } => Category::ChangeOptimisationFunction,
            MutationOp::ChangeGradientClip { .. } => Category::ChangeGradientClip,
            MutationOp::ChangeWeightsInitialisation { .. } => Category::ChangeWeightsInitialisation,
            MutationOp::ChangeDropoutRate { .. } => Category::ChangeDropoutRate,
        }
    }

    pub fn label(&self) -> u8 {
        self.category().label()
    }
}

impl fmt::Display for MutationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |layer: &Option<usize>| layer.map_or(String::new(), |l| format!("@{l}"));
        let name = self.category().operator_name();
        match self {
            MutationOp::ChangeLossFunction { loss } => write!(f, "{name}({loss})"),
            MutationOp::ChangeBatchSize { batch_size } => write!(f, "{name}({batch_size})"),
            MutationOp::ChangeLearningRate { lr } => write!(f, "{name}({lr:e})"),
            MutationOp::ChangeActivationFunction { layer, activation }
            | MutationOp::AddActivationFunction { layer, activation } => {
                write!(f, "{name}{}({activation})", at(layer))
            }
            MutationOp::RemoveActivationFunction { layer } => write!(f, "{name}{}", at(layer)),
            MutationOp::ChangeOptimisationFunction { optimizer } => write!(f, "{name}({optimizer})"),
            MutationOp::ChangeGradientClip { clip } => write!(f, "{name}({clip:e})"),
            MutationOp::ChangeWeightsInitialisation { layer, init } => {
                write!(f, "{name}{}({init})", at(layer))
            }
            MutationOp::ChangeDropoutRate { layer, rate } => write!(f, "{name}{}({rate})", at(layer)),
        }
    }
}

/// Labels of a list of operators, sorted ascending.
pub fn labels_of(ops: &[MutationOp]) -> Vec<u8> {
    let mut l: Vec<u8> = ops.iter().map(MutationOp::label).collect();
    l.sort_unstable();
    l
}

fn inapplicable(op: &MutationOp, reason: impl Into<String>) -> Error {
    Error::Inapplicable {
        op: op.to_string(),
        reason: reason.into(),
    }
}

/// Picks the target layer: the explicit index if it satisfies `ok`, else the
/// first layer that does.
fn target(
    op: &MutationOp,
    layers: &[LayerSpec],
    layer: Option<usize>,
    ok: impl Fn(usize, &LayerSpec) -> bool,
) -> Result<usize> {
    match layer {
        Some(i) => match layers.get(i) {
            Some(l) if ok(i, l) => Ok(i),
            Some(l) => Err(inapplicable(op, format!("layer {i} ({}) is not a valid target", l.kind_name()))),
            None => Err(inapplicable(op, format!("layer {i} does not exist"))),
        },
        None => layers
            .iter()
            .enumerate()
            .position(|(i, l)| ok(i, l))
            .ok_or_else(|| inapplicable(op, "no applicable layer")),
    }
}

/// Returns a mutated copy of `model`; the input is left untouched.
pub fn apply_operator(model: &ModelConfig, op: &MutationOp) -> Result<ModelConfig> {
    let mut m = model.clone();
    let last = m.spec.layers.len().saturating_sub(1);
    match op {
        MutationOp::ChangeLossFunction { loss } => {
            if m.train.loss == *loss {
                return Err(inapplicable(op, "loss is unchanged"));
            }
            m.train.loss = *loss;
        }
        MutationOp::ChangeBatchSize { batch_size } => {
            if *batch_size == 0 || m.train.batch_size == *batch_size {
                return Err(inapplicable(op, "batch size is zero or unchanged"));
            }
            m.train.batch_size = *batch_size;
        }
        MutationOp::ChangeLearningRate { lr } => {
            if !(lr.is_finite() && *lr > 0.0) || m.train.lr == *lr {
                return Err(inapplicable(op, "learning rate is invalid or unchanged"));
            }
            m.train.lr = *lr;
        }
        MutationOp::ChangeActivationFunction { layer, activation } => {
            // Hidden layers with a real (non-identity) activation.
            let i = target(op, &m.spec.layers, *layer, |i, l| {
                l.activation().is_some_and(|a| !a.is_identity() && a != *activation)
                    && (i < last || layer.is_some())
            })?;
            *m.spec.layers[i].activation_mut().expect("checked") = *activation;
        }
        MutationOp::AddActivationFunction { layer, activation } => {
            if activation.is_identity() {
                return Err(inapplicable(op, "added activation must be non-linear"));
            }
            let i = target(op, &m.spec.layers, *layer, |_, l| {
                l.activation().is_some_and(Activation::is_identity)
            })?;
            *m.spec.layers[i].activation_mut().expect("checked") = *activation;
        }
        MutationOp::RemoveActivationFunction { layer } => {
            let i = target(op, &m.spec.layers, *layer, |i, l| {
                l.activation().is_some_and(|a| a != Activation::None) && (i < last || layer.is_some())
            })?;
            *m.spec.layers[i].activation_mut().expect("checked") = Activation::None;
        }
        MutationOp::ChangeOptimisationFunction { optimizer } => {
            if m.train.optimizer == *optimizer {
                return Err(inapplicable(op, "optimizer is unchanged"));
            }
            m.train.optimizer = *optimizer;
        }
        MutationOp::ChangeGradientClip { clip } => {
            if !(clip.is_finite() && *clip > 0.0) || m.train.clip == Some(*clip) {
                return Err(inapplicable(op, "clip is invalid or unchanged"));
            }
            m.train.clip = Some(*clip);
        }
        MutationOp::ChangeWeightsInitialisation { layer, init } => {
            let i = target(op, &m.spec.layers, *layer, |_, l| {
                l.initializer().is_some_and(|cur| cur != *init)
            })?;
            *m.spec.layers[i].initializer_mut().expect("checked") = *init;
        }
        MutationOp::ChangeDropoutRate { layer, rate } => {
            if !(0.0..1.0).contains(rate) {
                return Err(inapplicable(op, "dropout rate must be in [0, 1)"));
            }
            let i = target(op, &m.spec.layers, *layer, |_, l| {
                matches!(l, LayerSpec::Dropout { rate: r } if r != rate)
            })?;
            m.spec.layers[i] = LayerSpec::Dropout { rate: *rate };
        }
    }
    Ok(m)
}

/// Applies `ops` left to right.
pub fn apply_all(model: &ModelConfig, ops: &[MutationOp]) -> Result<ModelConfig> {
    ops.iter().try_fold(model.clone(), |m, op| apply_operator(&m, op))
}
