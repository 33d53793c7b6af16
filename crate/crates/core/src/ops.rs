//! Convolution, normalization, and activation kernels.
//!
//! A dilated kernel tap at offset `o ∈ {−(k−1)/2 .. (k−1)/2}³` reads the
//! input `d·o` voxels away; zeros are implied outside the grid, so the
//! output spatial shape always equals the input's. The inner loops run over
//! contiguous x-rows clipped to the valid overlap, which keeps the hot path
//! branch-free and autovectorizable.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, Real};
use crate::net::{BnStats, ConvLayerSpec, NORM_EPSILON};
use crate::tensor::Tensor;

/// Apply one dilated convolution layer, reading `in_c` channels from
/// `input` and writing `layer.out_channels` channels into `out`.
///
/// `input` holds `in_c · N` scalars and `out` at least `out_c · N`, where
/// `N` is the voxel count of `shape`. The two buffers must be disjoint.
pub(crate) fn conv_into<T: Real + Send + Sync>(
    input: &[T],
    shape: [usize; 3],
    layer: &ConvLayerSpec,
    weight: &[T],
    bias: Option<&[T]>,
    out: &mut [T],
) {
    let [nx, ny, nz] = shape;
    let n = nx * ny * nz;
    let in_c = layer.in_channels;
    let k = layer.kernel_size;
    let half = (k as isize - 1) / 2;
    let d = layer.dilation as isize;

    let channel_pass = |oc: usize, out_chan: &mut [T]| {
        let fill = bias.map_or(T::ZERO, |b| b[oc]);
        out_chan[..n].fill(fill);
        for ic in 0..in_c {
            let in_chan = &input[ic * n..(ic + 1) * n];
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
                        let w = weight[(((oc * in_c + ic) * k + kx) * k + ky) * k + kz];
                        if w == T::ZERO {
                            continue;
                        }
                        for z in z0..z1 {
                            let src_z = (z as isize + oz) as usize;
                            for y in y0..y1 {
                                let src_y = (y as isize + oy) as usize;
                                let dst = (z * ny + y) * nx;
                                let src = ((src_z * ny + src_y) * nx) as isize + ox;
                                let dst_row = &mut out_chan[dst + x0..dst + x1];
                                let src_row =
                                    &in_chan[(src + x0 as isize) as usize..][..x1 - x0];
                                for (o, &i) in dst_row.iter_mut().zip(src_row) {
                                    *o += w * i;
                                }
                            }
                        }
                    }
                }
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out[..layer.out_channels * n]
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(oc, chan)| channel_pass(oc, chan));
    }
    #[cfg(not(feature = "parallel"))]
    for (oc, chan) in out[..layer.out_channels * n].chunks_mut(n).enumerate() {
        channel_pass(oc, chan);
    }
}

/// Overlap of the shifted row `[o, o+extent)` with `[0, extent)`.
#[inline]
fn clip(offset: isize, extent: usize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi_signed = extent as isize - offset.max(0);
    let hi = hi_signed.max(0) as usize;
    (lo.min(extent), hi.min(extent))
}

/// Dilated 3D convolution of a channel-major tensor.
///
/// `weight` is indexed `[out][in][kx][ky][kz]` row-major; `bias`, when
/// present, has one scalar per output channel. A 1-kernel degenerates to a
/// per-voxel channel mix.
pub fn dilated_conv3d<T: Real + Send + Sync>(
    input: &Tensor<T>,
    layer: &ConvLayerSpec,
    weight: &[T],
    bias: Option<&[T]>,
) -> Result<Tensor<T>> {
    layer.validate()?;
    if input.channels() != layer.in_channels {
        return Err(Error::ChannelMismatch {
            expected: layer.in_channels,
            got: input.channels(),
        });
    }
    if weight.len() != layer.weight_len() {
        return Err(Error::WeightShapeMismatch {
            layer: 0,
            detail: alloc::format!(
                "weight has {} scalars, expected {}",
                weight.len(),
                layer.weight_len()
            ),
        });
    }
    if let Some(b) = bias {
        if b.len() != layer.out_channels {
            return Err(Error::WeightShapeMismatch {
                layer: 0,
                detail: alloc::format!(
                    "bias has {} scalars, expected {}",
                    b.len(),
                    layer.out_channels
                ),
            });
        }
    }
    let mut out = vec![T::ZERO; layer.out_channels * input.voxels()];
    conv_into(input.data(), input.shape(), layer, weight, bias, &mut out);
    Tensor::from_data(layer.out_channels, input.shape(), out)
}

/// Z-score the whole buffer: `y = (x − mean) / sqrt(var + ε)` with mean and
/// population variance taken over every element (channels and space
/// jointly). No learned parameters. Statistics accumulate in f64.
pub(crate) fn layernorm_pf_in_place<T: Real>(data: &mut [T]) {
    if data.is_empty() {
        return;
    }
    let n = data.len() as f64;
    let mut sum = 0.0f64;
    for v in data.iter() {
        sum += v.to_f64();
    }
    let mean = sum / n;
    let mut sq = 0.0f64;
    for v in data.iter() {
        let d = v.to_f64() - mean;
        sq += d * d;
    }
    let inv = 1.0 / math::sqrt(sq / n + NORM_EPSILON);
    for v in data.iter_mut() {
        *v = T::from_f64((v.to_f64() - mean) * inv);
    }
}

/// Parameter-free layer normalization of a whole tensor.
pub fn layernorm_pf<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    layernorm_pf_in_place(out.data_mut());
    out
}

pub(crate) fn batchnorm_stats_in_place<T: Real>(data: &mut [T], voxels: usize, stats: &BnStats) {
    for (c, chan) in data.chunks_mut(voxels).enumerate() {
        let a = stats.scale[c] as f64 / math::sqrt(stats.var[c] as f64 + NORM_EPSILON);
        let b = stats.shift[c] as f64 - stats.mean[c] as f64 * a;
        for v in chan.iter_mut() {
            *v = T::from_f64(a * v.to_f64() + b);
        }
    }
}

/// Per-channel affine normalization with stored statistics:
/// `y = scale·(x − mean)/sqrt(var + ε) + shift`. Inference only.
pub fn batchnorm_stats<T: Real>(input: &Tensor<T>, stats: &BnStats) -> Result<Tensor<T>> {
    let c = input.channels();
    if stats.mean.len() != c || stats.var.len() != c || stats.scale.len() != c || stats.shift.len() != c {
        return Err(Error::WeightShapeMismatch {
            layer: 0,
            detail: alloc::format!("statistics are not {c} per channel"),
        });
    }
    let mut out = input.clone();
    batchnorm_stats_in_place(out.data_mut(), input.voxels(), stats);
    Ok(out)
}

pub(crate) fn relu_in_place<T: Real>(data: &mut [T]) {
    for v in data.iter_mut() {
        if *v < T::ZERO {
            *v = T::ZERO;
        }
    }
}

/// Identity-kernel weights for a layer (center tap 1 on the channel
/// diagonal). Handy for constructing pass-through networks in tests and
/// fixtures; requires `in_channels == out_channels`.
pub fn identity_weight(layer: &ConvLayerSpec) -> Vec<f32> {
    let k = layer.kernel_size;
    let center = (k - 1) / 2;
    let mut w = vec![0.0f32; layer.weight_len()];
    let c = layer.in_channels.min(layer.out_channels);
    for ch in 0..c {
        w[(((ch * layer.in_channels + ch) * k + center) * k + center) * k + center] = 1.0;
    }
    w
}
