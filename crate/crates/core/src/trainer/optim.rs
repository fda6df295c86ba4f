use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{OptimizerKind, TrainConfig};
use super::model::{Gradients, Params};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

fn check_finite(grads: &Gradients) -> Result<()> {
    for (key, g) in grads.iter() {
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient(key.name()));
        }
    }
    Ok(())
}

fn check_layout(params: &Params, grads: &Gradients) -> Result<()> {
    let p: Vec<_> = params.iter().map(|(k, m)| (k, m.shape())).collect();
    let g: Vec<_> = grads.iter().map(|(k, m)| (k, m.shape())).collect();
    if p != g {
        return Err(Error::Config("gradient keys do not match the trainable weights".into()));
    }
    Ok(())
}

/// Plain gradient descent: `W ← W − η (∇ + λ W)`.
pub fn sgd_step(params: &mut Params, grads: &Gradients, lr: f64, weight_decay: f64) -> Result<()> {
    check_layout(params, grads)?;
    check_finite(grads)?;
    for ((_, w), (_, g)) in params.iter_mut().zip(grads.iter()) {
        if weight_decay != 0.0 {
            w.scale(1.0 - lr * weight_decay);
        }
        w.axpy(-lr, g)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub first: Params,
    pub second: Params,
}

/// Optimizer with whatever state it carries between steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Gd { lr: f64, weight_decay: f64 },
    Adam { lr: f64, weight_decay: f64, state: Box<AdamState> },
}

impl Optimizer {
    pub fn new(config: &TrainConfig, params: &Params) -> Self {
        let (lr, weight_decay) = (config.learning_rate, config.weight_decay);
        match config.optimizer {
            OptimizerKind::Gd => Self::Gd { lr, weight_decay },
            OptimizerKind::Adam => Self::Adam {
                lr,
                weight_decay,
                state: Box::new(AdamState {
                    step: 0,
                    first: params.zeros_like(),
                    second: params.zeros_like(),
                }),
            },
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Gradients) -> Result<()> {
        match self {
            Self::Gd { lr, weight_decay } => sgd_step(params, grads, *lr, *weight_decay),
            Self::Adam {
                lr,
                weight_decay,
                state,
            } => {
                check_layout(params, grads)?;
                check_finite(grads)?;
                state.step += 1;
                let t = state.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                let moments = state.first.iter_mut().zip(state.second.iter_mut());
                for (((_, w), (_, g)), ((_, m), (_, v))) in params.iter_mut().zip(grads.iter()).zip(moments) {
                    let w = w.as_mut_slice();
                    let m = m.as_mut_slice();
                    let v = v.as_mut_slice();
                    for (i, &gi) in g.as_slice().iter().enumerate() {
                        let gi = gi + *weight_decay * w[i];
                        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                        w[i] -= *lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                    }
                }
                Ok(())
            }
        }
    }
}
