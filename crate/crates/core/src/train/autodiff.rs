//! Reverse-mode gradients for the conv → layernorm → relu stack under the
//! soft Dice loss.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::net::{Activation, ConvLayerSpec, NetworkSpec, Norm, WeightStore, NORM_EPSILON};
use crate::ops;
use crate::tensor::Tensor;
use crate::volume::Mask;

/// Smoothing constant in the soft Dice loss.
pub const SOFT_DICE_SMOOTHING: f64 = 1.0;

/// Per-layer gradient (or moment) tensors, shapes mirroring the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

/// Gradients for every layer of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStore {
    pub layers: Vec<LayerGrads>,
}

impl GradStore {
    pub fn zeros_like(store: &WeightStore) -> Self {
        GradStore {
            layers: store
                .layers
                .iter()
                .map(|lw| LayerGrads {
                    weight: vec![0.0; lw.weight.len()],
                    bias: lw.bias.as_ref().map(|b| vec![0.0; b.len()]),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradStore) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.iter_mut().zip(&b.weight) {
                *x += y;
            }
            if let (Some(ab), Some(bb)) = (a.bias.as_mut(), b.bias.as_ref()) {
                for (x, y) in ab.iter_mut().zip(bb) {
                    *x += y;
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            for x in &mut l.weight {
                *x *= s;
            }
            if let Some(b) = &mut l.bias {
                for x in b {
                    *x *= s;
                }
            }
        }
    }

    /// Largest absolute gradient entry.
    pub fn max_abs(&self) -> f64 {
        let mut worst = 0.0f64;
        for l in &self.layers {
            for &x in &l.weight {
                worst = worst.max(math::abs(x));
            }
            if let Some(b) = &l.bias {
                for &x in b {
                    worst = worst.max(math::abs(x));
                }
            }
        }
        worst
    }
}

/// f64 copies of the stored f32 weights.
struct Weights64 {
    layers: Vec<LayerGrads>,
}

impl Weights64 {
    fn from_store(store: &WeightStore) -> Self {
        Weights64 {
            layers: store
                .layers
                .iter()
                .map(|lw| LayerGrads {
                    weight: lw.weight.iter().map(|&w| w as f64).collect(),
                    bias: lw
                        .bias
                        .as_ref()
                        .map(|b| b.iter().map(|&v| v as f64).collect()),
                })
                .collect(),
        }
    }
}

/// Soft Dice loss over a brain-probability tensor:
/// `1 − (2·Σ p·g + s) / (Σ p + Σ g + s)` with smoothing `s = 1`.
pub fn soft_dice_loss(pred_prob: &Tensor<f64>, target: &Mask) -> Result<f64> {
    if pred_prob.channels() != 1 {
        return Err(Error::ChannelMismatch {
            expected: 1,
            got: pred_prob.channels(),
        });
    }
    if pred_prob.shape() != target.grid.shape {
        return Err(Error::ShapeMismatch {
            detail: alloc::format!(
                "prob {:?} vs target {:?}",
                pred_prob.shape(),
                target.grid.shape
            ),
        });
    }
    let (inter, psum, gsum) = dice_sums(pred_prob.data(), &target.data);
    Ok(1.0 - (2.0 * inter + SOFT_DICE_SMOOTHING) / (psum + gsum + SOFT_DICE_SMOOTHING))
}

fn dice_sums(p: &[f64], g: &[u8]) -> (f64, f64, f64) {
    let mut inter = 0.0f64;
    let mut psum = 0.0f64;
    let mut gsum = 0.0f64;
    for (&pv, &gv) in p.iter().zip(g) {
        psum += pv;
        if gv != 0 {
            inter += pv;
            gsum += 1.0;
        }
    }
    (inter, psum, gsum)
}

/// One layer forward in f64, returning the post-activation output plus what
/// the backward pass needs: the normalized (pre-activation) tensor and the
/// inverse standard deviation of the layernorm.
fn apply_layer_traced(
    layer: &ConvLayerSpec,
    w: &LayerGrads,
    input: &Tensor<f64>,
) -> (Tensor<f64>, Tensor<f64>, f64) {
    let n = input.voxels();
    let mut z = vec![0.0f64; layer.out_channels * n];
    ops::conv_into(
        input.data(),
        input.shape(),
        layer,
        &w.weight,
        w.bias.as_deref(),
        &mut z,
    );
    let mut inv_std = 0.0;
    match layer.norm {
        Norm::None => {}
        Norm::ParamFreeLayerNorm => {
            let len = z.len() as f64;
            let mean = z.iter().sum::<f64>() / len;
            let var = z.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / len;
            inv_std = 1.0 / math::sqrt(var + NORM_EPSILON);
            for v in &mut z {
                *v = (*v - mean) * inv_std;
            }
        }
        Norm::BatchNormStats => unreachable!("rejected before training"),
    }
    let normed = Tensor::from_data(layer.out_channels, input.shape(), z).expect("shape static");
    let mut out = normed.clone();
    if layer.activation == Activation::Relu {
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    (out, normed, inv_std)
}

fn apply_layer(layer: &ConvLayerSpec, w: &LayerGrads, input: &Tensor<f64>) -> Tensor<f64> {
    apply_layer_traced(layer, w, input).0
}

fn run_prefix(
    spec: &NetworkSpec,
    w: &Weights64,
    input: &Tensor<f64>,
    upto: usize,
) -> Tensor<f64> {
    let mut cur = input.clone();
    for i in 0..upto {
        cur = apply_layer(&spec.layers[i], &w.layers[i], &cur);
    }
    cur
}

/// Brain probability from two-channel logits: `sigmoid(l₁ − l₀)`.
fn softmax_brain(logits: &Tensor<f64>) -> Tensor<f64> {
    let n = logits.voxels();
    let bg = logits.channel(0);
    let brain = logits.channel(1);
    let mut p = Vec::with_capacity(n);
    for i in 0..n {
        p.push(math::sigmoid(brain[i] - bg[i]));
    }
    Tensor::from_data(1, logits.shape(), p).expect("shape static")
}

/// Loss of the full composition without gradients (used by the
/// finite-difference oracle).
pub fn forward_loss(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor<f64>,
    target: &Mask,
) -> Result<f64> {
    check_trainable(spec, weights, input, target)?;
    let w = Weights64::from_store(weights);
    let logits = run_prefix(spec, &w, input, spec.layers.len());
    let prob = softmax_brain(&logits);
    soft_dice_loss(&prob, target)
}

fn check_trainable(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor<f64>,
    target: &Mask,
) -> Result<()> {
    spec.validate()?;
    weights.validate_against(spec)?;
    if spec.layers.iter().any(|l| l.norm == Norm::BatchNormStats) {
        return Err(Error::InvalidSpec(
            "training supports parameter-free layernorm only".into(),
        ));
    }
    if spec.output_channels() != 2 {
        return Err(Error::InvalidSpec(
            "training expects two logit channels".into(),
        ));
    }
    if input.channels() != spec.input_channels() {
        return Err(Error::ChannelMismatch {
            expected: spec.input_channels(),
            got: input.channels(),
        });
    }
    if input.shape() != target.grid.shape {
        return Err(Error::ShapeMismatch {
            detail: alloc::format!(
                "input {:?} vs target {:?}",
                input.shape(),
                target.grid.shape
            ),
        });
    }
    Ok(())
}

/// Gradient of the layer input given the gradient of its convolution
/// output: `g_in[ic, q] = Σ_{oc, o} w[oc, ic, o] · g_z[oc, q − d·o]`.
fn conv_backward_input(
    g_z: &Tensor<f64>,
    layer: &ConvLayerSpec,
    weight: &[f64],
) -> Tensor<f64> {
    let [nx, ny, nz] = g_z.shape();
    let n = g_z.voxels();
    let k = layer.kernel_size;
    let half = (k as isize - 1) / 2;
    let d = layer.dilation as isize;
    let mut g_in = Tensor::<f64>::zeros(layer.in_channels, g_z.shape());
    for ic in 0..layer.in_channels {
        let chan = g_in.channel_mut(ic);
        for oc in 0..layer.out_channels {
            let gz_chan = &g_z.data()[oc * n..(oc + 1) * n];
            for kx in 0..k {
                let ox = d * (kx as isize - half);
                let (x0, x1) = clip_neg(ox, nx);
                if x0 >= x1 {
                    continue;
                }
                for ky in 0..k {
                    let oy = d * (ky as isize - half);
                    let (y0, y1) = clip_neg(oy, ny);
                    for kz in 0..k {
                        let oz = d * (kz as isize - half);
                        let (z0, z1) = clip_neg(oz, nz);
                        let w = weight[(((oc * layer.in_channels + ic) * k + kx) * k + ky) * k + kz];
                        if w == 0.0 {
                            continue;
                        }
                        for z in z0..z1 {
                            let src_z = (z as isize - oz) as usize;
                            for y in y0..y1 {
                                let src_y = (y as isize - oy) as usize;
                                let dst = (z * ny + y) * nx;
                                let src = ((src_z * ny + src_y) * nx) as isize - ox;
                                let dst_row = &mut chan[dst + x0..dst + x1];
                                let src_row =
                                    &gz_chan[(src + x0 as isize) as usize..][..x1 - x0];
                                for (o, &g) in dst_row.iter_mut().zip(src_row) {
                                    *o += w * g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    g_in
}

/// Overlap of the row `[−o, extent−o)` with `[0, extent)` (reads at `q − o`).
#[inline]
fn clip_neg(offset: isize, extent: usize) -> (usize, usize) {
    let lo = offset.max(0) as usize;
    let hi_signed = extent as isize + offset.min(0);
    let hi = hi_signed.max(0) as usize;
    (lo.min(extent), hi.min(extent))
}

/// Weight and bias gradients of one convolution:
/// `g_w[oc, ic, o] = Σ_p g_z[oc, p] · a_in[ic, p + d·o]`.
fn conv_backward_weights(
    g_z: &Tensor<f64>,
    a_in: &Tensor<f64>,
    layer: &ConvLayerSpec,
) -> LayerGrads {
    let [nx, ny, nz] = g_z.shape();
    let n = g_z.voxels();
    let k = layer.kernel_size;
    let half = (k as isize - 1) / 2;
    let d = layer.dilation as isize;
    let mut g_w = vec![0.0f64; layer.weight_len()];
    for oc in 0..layer.out_channels {
        let gz_chan = &g_z.data()[oc * n..(oc + 1) * n];
        for ic in 0..layer.in_channels {
            let in_chan = a_in.channel(ic);
            for kx in 0..k {
                let ox = d * (kx as isize - half);
                let (x0, x1) = clip(ox, nx);
                if x0 >= x1 {
                    continue;
                }
                for ky in 0..k {
                    let oy = d * (ky as isize - half);
                    let (y0, y1) = clip(oy, ny);
                    for kz in 0..k {
                        let oz = d * (kz as isize - half);
                        let (z0, z1) = clip(oz, nz);
                        let mut acc = 0.0f64;
                        for z in z0..z1 {
                            let src_z = (z as isize + oz) as usize;
                            for y in y0..y1 {
                                let src_y = (y as isize + oy) as usize;
                                let dst = (z * ny + y) * nx;
                                let src = ((src_z * ny + src_y) * nx) as isize + ox;
                                let g_row = &gz_chan[dst + x0..dst + x1];
                                let a_row =
                                    &in_chan[(src + x0 as isize) as usize..][..x1 - x0];
                                for (&g, &a) in g_row.iter().zip(a_row) {
                                    acc += g * a;
                                }
                            }
                        }
                        g_w[(((oc * layer.in_channels + ic) * k + kx) * k + ky) * k + kz] = acc;
                    }
                }
            }
        }
    }
    let g_b = layer.has_bias.then(|| {
        (0..layer.out_channels)
            .map(|oc| g_z.data()[oc * n..(oc + 1) * n].iter().sum::<f64>())
            .collect()
    });
    LayerGrads {
        weight: g_w,
        bias: g_b,
    }
}

#[inline]
fn clip(offset: isize, extent: usize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi_signed = extent as isize - offset.max(0);
    let hi = hi_signed.max(0) as usize;
    (lo.min(extent), hi.min(extent))
}

/// Shared backward pass. `materialize` caches every activation from a
/// single forward sweep; otherwise each layer input is recomputed from the
/// network input on demand, which is the constant-memory path. Both
/// variants drive the same per-layer computations in the same order, so the
/// results are bit-identical.
fn backward_impl(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor<f64>,
    target: &Mask,
    materialize: bool,
) -> Result<(f64, GradStore, Tensor<f64>)> {
    check_trainable(spec, weights, input, target)?;
    let w = Weights64::from_store(weights);
    let depth = spec.layers.len();

    let mut cached: Vec<Tensor<f64>> = Vec::new();
    let logits = if materialize {
        cached.reserve(depth);
        cached.push(input.clone());
        for i in 0..depth {
            let next = apply_layer(&spec.layers[i], &w.layers[i], &cached[i]);
            cached.push(next);
        }
        cached[depth].clone()
    } else {
        run_prefix(spec, &w, input, depth)
    };

    let prob = softmax_brain(&logits);
    let (inter, psum, gsum) = dice_sums(prob.data(), &target.data);
    let denom = psum + gsum + SOFT_DICE_SMOOTHING;
    let numer = 2.0 * inter + SOFT_DICE_SMOOTHING;
    let loss = 1.0 - numer / denom;

    let n = prob.voxels();
    let mut g_logits = Tensor::<f64>::zeros(2, logits.shape());
    {
        let p = prob.data();
        let (g0, g1) = g_logits.data_mut().split_at_mut(n);
        for i in 0..n {
            let gv = if target.data[i] != 0 { 1.0 } else { 0.0 };
            // d loss / d p_i for the smoothed Dice ratio
            let dl_dp = -(2.0 * gv * denom - numer) / (denom * denom);
            let dsig = p[i] * (1.0 - p[i]);
            g1[i] = dl_dp * dsig;
            g0[i] = -g1[i];
        }
    }

    let mut grads = GradStore::zeros_like(weights);
    let mut g_out = g_logits;
    for i in (0..depth).rev() {
        let layer = &spec.layers[i];
        let a_in = if materialize {
            cached[i].clone()
        } else {
            run_prefix(spec, &w, input, i)
        };
        let (_, normed, inv_std) = apply_layer_traced(layer, &w.layers[i], &a_in);

        // relu: pass gradient only where the pre-activation was positive
        let mut g_y = g_out;
        if layer.activation == Activation::Relu {
            for (g, &y) in g_y.data_mut().iter_mut().zip(normed.data()) {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }
        }

        // layernorm: g_z = s⁻¹ (g_y − mean(g_y) − ŷ · mean(g_y ⊙ ŷ))
        let g_z = match layer.norm {
            Norm::None => g_y,
            Norm::ParamFreeLayerNorm => {
                let len = g_y.data().len() as f64;
                let mean_g = g_y.data().iter().sum::<f64>() / len;
                let mean_gy = g_y
                    .data()
                    .iter()
                    .zip(normed.data())
                    .map(|(&g, &y)| g * y)
                    .sum::<f64>()
                    / len;
                let mut g_z = g_y;
                for (g, &y) in g_z.data_mut().iter_mut().zip(normed.data()) {
                    *g = inv_std * (*g - mean_g - y * mean_gy);
                }
                g_z
            }
            Norm::BatchNormStats => unreachable!("rejected before training"),
        };

        grads.layers[i] = conv_backward_weights(&g_z, &a_in, layer);
        if i > 0 {
            g_out = conv_backward_input(&g_z, layer, &w.layers[i].weight);
        } else {
            g_out = g_z; // unused
        }
    }

    Ok((loss, grads, prob))
}

/// Reverse-mode gradients of `soft_dice_loss ∘ softmax ∘ forward` with
/// respect to every weight and bias, recomputing activations per layer so
/// live activation memory stays constant in depth.
pub fn backward(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor<f64>,
    target: &Mask,
) -> Result<(f64, GradStore)> {
    backward_impl(spec, weights, input, target, false).map(|(l, g, _)| (l, g))
}

/// Reference backward pass that materializes every intermediate activation.
/// Bit-identical to [`backward`]; exists to pin that equivalence in tests.
pub fn backward_materialized(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor<f64>,
    target: &Mask,
) -> Result<(f64, GradStore)> {
    backward_impl(spec, weights, input, target, true).map(|(l, g, _)| (l, g))
}

pub(crate) fn backward_with_prob(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor<f64>,
    target: &Mask,
) -> Result<(f64, GradStore, Tensor<f64>)> {
    backward_impl(spec, weights, input, target, false)
}
