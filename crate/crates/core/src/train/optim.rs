//! Adam with bias correction and the repeating one-cycle schedule.

use alloc::vec;
use alloc::vec::Vec;

use super::autodiff::{GradStore, LayerGrads};
use super::TrainConfig;
use crate::math;
use crate::net::WeightStore;

/// First/second-moment tensors, shapes mirroring the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<LayerGrads>,
    pub v: Vec<LayerGrads>,
}

impl AdamState {
    pub fn zeros_like(store: &WeightStore) -> Self {
        let zeros = || -> Vec<LayerGrads> {
            store
                .layers
                .iter()
                .map(|lw| LayerGrads {
                    weight: vec![0.0; lw.weight.len()],
                    bias: lw.bias.as_ref().map(|b| vec![0.0; b.len()]),
                })
                .collect()
        };
        AdamState {
            m: zeros(),
            v: zeros(),
        }
    }
}

fn powi(base: f64, exp: usize) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

#[inline]
fn adam_update(w: &mut f32, g: f64, m: &mut f64, v: &mut f64, lr: f64, c1: f64, c2: f64, cfg: &TrainConfig) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / c1;
    let v_hat = *v / c2;
    *w = (*w as f64 - lr * m_hat / (math::sqrt(v_hat) + cfg.epsilon)) as f32;
}

/// One Adam step (`step` counts from 1 for bias correction):
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `w ← w − lr·m̂/(√v̂ + ε)`.
pub fn adam_step(
    weights: &mut WeightStore,
    grads: &GradStore,
    state: &mut AdamState,
    step: usize,
    lr: f64,
    cfg: &TrainConfig,
) {
    debug_assert!(step >= 1);
    let c1 = 1.0 - powi(cfg.beta1, step);
    let c2 = 1.0 - powi(cfg.beta2, step);
    for (i, lw) in weights.layers.iter_mut().enumerate() {
        let lg = &grads.layers[i];
        for (j, w) in lw.weight.iter_mut().enumerate() {
            adam_update(
                w,
                lg.weight[j],
                &mut state.m[i].weight[j],
                &mut state.v[i].weight[j],
                lr,
                c1,
                c2,
                cfg,
            );
        }
        if let (Some(b), Some(gb)) = (lw.bias.as_mut(), lg.bias.as_ref()) {
            let mb = state.m[i].bias.as_mut().expect("moment shapes mirror weights");
            let vb = state.v[i].bias.as_mut().expect("moment shapes mirror weights");
            for (j, w) in b.iter_mut().enumerate() {
                adam_update(w, gb[j], &mut mb[j], &mut vb[j], lr, c1, c2, cfg);
            }
        }
    }
}

/// Learning rate at `step` of a repeating one-cycle schedule: a linear ramp
/// from 0 to `max_lr` over the warmup fraction of each cycle, then a cosine
/// anneal back to 0. Cycles repeat every `cycle_len` steps.
pub fn onecycle_lr(step: usize, cycle_len: usize, cfg: &TrainConfig) -> f64 {
    debug_assert!(cycle_len >= 1);
    let pos = (step % cycle_len) as f64;
    let warm = cfg.pct_warmup * cycle_len as f64;
    if pos <= warm {
        cfg.max_lr * pos / warm
    } else {
        let frac = (pos - warm) / (cycle_len as f64 - warm);
        cfg.max_lr * (1.0 + math::cos(core::f64::consts::PI * frac)) / 2.0
    }
}
