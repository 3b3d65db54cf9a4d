use super::model::Weights;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            decay: 0.9,
            eps: 1e-8,
        }
    }
}

/// RMSprop with one squared-gradient accumulator per parameter:
///
/// ```text
/// v ← decay·v + (1 − decay)·g²
/// p ← p − lr·g / (√v + eps)
/// ```
#[derive(Debug, Clone)]
pub struct OptState {
    pub config: RmsPropConfig,
    accum: Weights,
}

impl OptState {
    pub fn new(config: RmsPropConfig, like: &Weights) -> Self {
        Self {
            config,
            accum: like.zeros_like(),
        }
    }

    pub fn accumulators(&self) -> &Weights {
        &self.accum
    }

    pub fn step(&mut self, params: &mut Weights, grads: &Weights) {
        rmsprop_step(params, grads, &mut self.accum, &self.config);
    }
}

pub fn rmsprop_step(params: &mut Weights, grads: &Weights, accum: &mut Weights, cfg: &RmsPropConfig) {
    let g_all = grads.tensors();
    for ((p, v), (_, _, g)) in params
        .tensors_mut()
        .into_iter()
        .zip(accum.tensors_mut())
        .zip(g_all)
    {
        for ((p, v), &g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *v = cfg.decay * *v + (1.0 - cfg.decay) * g * g;
            *p -= cfg.lr * g / (v.sqrt() + cfg.eps);
        }
    }
}
