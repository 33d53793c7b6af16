//! Desk-scale training on synthetic shapes.
//!
//! The training path runs in f64 end to end (weights are stored as f32 and
//! upcast at the boundary) so gradient reductions stay clean enough to
//! compare against central finite differences. Backpropagation recomputes
//! activations layer by layer instead of materializing them, keeping live
//! activation memory at a constant number of layer buffers regardless of
//! depth; the materializing variant exists as a reference and produces
//! bit-identical gradients.

mod autodiff;
mod optim;
mod synth;

pub use autodiff::{
    backward, backward_materialized, forward_loss, soft_dice_loss, GradStore, LayerGrads,
    SOFT_DICE_SMOOTHING,
};
pub use optim::{adam_step, onecycle_lr, AdamState};
pub use synth::SphereTask;

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::net::{NetworkSpec, Norm, WeightStore};
use crate::volume::Mask;

/// Hyperparameters for [`train_toy`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_lr: f64,
    pub total_steps: usize,
    /// Number of one-cycle repetitions across the run.
    pub cycles: usize,
    /// Fraction of each cycle spent ramping up.
    pub pct_warmup: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_lr: 0.02,
            total_steps: 500,
            cycles: 5,
            pct_warmup: 0.3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 1,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pct_warmup > 0.0 && self.pct_warmup < 1.0) {
            return Err(Error::InvalidSpec("pct_warmup must be in (0, 1)".into()));
        }
        if self.cycles == 0 || self.total_steps < self.cycles {
            return Err(Error::InvalidSpec(
                "total_steps must cover at least one step per cycle".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidSpec("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn cycle_len(&self) -> usize {
        (self.total_steps / self.cycles).max(1)
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    /// Hard Dice of the thresholded prediction against the batch target.
    pub dice: f64,
}

/// He-style initialization: zero biases, kernel weights from
/// `N(0, 2/fan_in)`.
pub fn init_weights(spec: &NetworkSpec, seed: u64) -> WeightStore {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut store = WeightStore::zeroed(spec);
    for (layer, lw) in spec.layers.iter().zip(&mut store.layers) {
        let fan_in = (layer.in_channels
            * layer.kernel_size
            * layer.kernel_size
            * layer.kernel_size) as f64;
        let std = crate::math::sqrt(2.0 / fan_in);
        for w in &mut lw.weight {
            *w = (synth::standard_normal(&mut rng) * std) as f32;
        }
    }
    store
}

/// Train a small network on synthetic shapes; deterministic given the seed.
///
/// Returns the trained weights and the per-step log. Only
/// parameter-free-layernorm (or norm-free) specs are trainable; stored
/// batchnorm statistics are an inference-time construct.
pub fn train_toy(
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    task: &SphereTask,
) -> Result<(WeightStore, Vec<TrainRecord>)> {
    cfg.validate()?;
    spec.validate()?;
    if spec.layers.iter().any(|l| l.norm == Norm::BatchNormStats) {
        return Err(Error::InvalidSpec(
            "training supports parameter-free layernorm only".into(),
        ));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut weights = init_weights(spec, cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = AdamState::zeros_like(&weights);
    let cycle_len = cfg.cycle_len();
    let mut records = Vec::with_capacity(cfg.total_steps);

    for step in 1..=cfg.total_steps {
        let lr = onecycle_lr(step - 1, cycle_len, cfg);

        let mut grads: Option<GradStore> = None;
        let mut loss_sum = 0.0;
        let mut dice_sum = 0.0;
        for _ in 0..cfg.batch_size {
            let (volume, target) = task.sample(&mut rng);
            let (loss, g, prob) = autodiff::backward_with_prob(spec, &weights, &volume, &target)?;
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { step });
            }
            loss_sum += loss;
            dice_sum += hard_dice(&prob, &target);
            match &mut grads {
                None => grads = Some(g),
                Some(acc) => acc.add_assign(&g),
            }
        }
        let mut grads = grads.expect("batch_size >= 1");
        grads.scale(1.0 / cfg.batch_size as f64);

        adam_step(&mut weights, &grads, &mut adam, step, lr, cfg);
        records.push(TrainRecord {
            step,
            lr,
            loss: loss_sum / cfg.batch_size as f64,
            dice: dice_sum / cfg.batch_size as f64,
        });
    }
    Ok((weights, records))
}

/// Hard Dice of `prob > 0.5` against the target mask.
pub fn hard_dice(prob: &crate::tensor::Tensor<f64>, target: &Mask) -> f64 {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fne = 0u64;
    for (&p, &g) in prob.data().iter().zip(&target.data) {
        match (p > 0.5, g != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}
