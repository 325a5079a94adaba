use super::layers::Param;
use super::spec::{OptimizerKind, TrainConfig};

/// Per-parameter optimizer state, keyed by parameter visiting order.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Gradients are clipped by value in place first when
    /// `cfg.clip` is set. Non-finite values propagate into the parameters.
    pub fn step<'a>(&mut self, cfg: &TrainConfig, params: impl IntoIterator<Item = &'a mut Param>) {
        self.step += 1;
        let t = self.step as i32;
        for (slot, p) in params.into_iter().enumerate() {
            if self.first.len() <= slot {
                self.first.push(vec![0.0; p.value.len()]);
                self.second.push(vec![0.0; p.value.len()]);
            }
            if let Some(c) = cfg.clip {
                p.grad.data_mut().iter_mut().for_each(|g| *g = g.clamp(-c, c));
            }
            let m = &mut self.first[slot];
            let v = &mut self.second[slot];
            let theta = p.value.data_mut();
            let grad = p.grad.data();
            match self.kind {
                OptimizerKind::Sgd => {
                    for ((w, &g), vel) in theta.iter_mut().zip(grad).zip(m.iter_mut()) {
                        *vel = cfg.momentum * *vel + g;
                        *w -= cfg.lr * *vel;
                    }
                }
                OptimizerKind::Adam => {
                    let c1 = 1.0 - cfg.beta1.powi(t);
                    let c2 = 1.0 - cfg.beta2.powi(t);
                    for (((w, &g), mi), vi) in theta.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
                        *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *w -= cfg.lr * mhat / (vhat.sqrt() + cfg.epsilon);
                    }
                }
                OptimizerKind::Rmsprop => {
                    for ((w, &g), vi) in theta.iter_mut().zip(grad).zip(v.iter_mut()) {
                        *vi = cfg.rho * *vi + (1.0 - cfg.rho) * g * g;
                        *w -= cfg.lr * g / (vi.sqrt() + cfg.epsilon);
                    }
                }
            }
        }
    }
}
