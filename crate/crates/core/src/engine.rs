//! Two-buffer ("ping-pong") inference engine.
//!
//! An isometric fully convolutional stack never needs more than the input
//! and output of the layer currently executing, so the engine allocates
//! exactly two activation buffers sized for the widest layer and alternates
//! between them. Every buffer the engine creates is reported to
//! [`ActivationStats`], which tests and the benchmark subcommand use to
//! assert the peak-memory contract.

use alloc::vec;
use alloc::vec::Vec;
use core::mem;

use crate::error::{Error, Result};
use crate::geom::Grid;
use crate::net::{NetworkSpec, Norm, WeightStore};
use crate::ops;
use crate::tensor::{ActivationTensor, Tensor};
use crate::volume::Mask;

/// Allocation accounting for engine-owned activation memory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActivationStats {
    /// High-water mark of concurrently live activation bytes.
    pub peak_bytes: usize,
    /// Activation bytes live right now (the returned logits, once the
    /// engine has finished).
    pub current_bytes: usize,
    /// Number of ping-pong working buffers allocated (always 2).
    pub buffers_allocated: usize,
}

impl ActivationStats {
    fn on_alloc(&mut self, bytes: usize) {
        self.current_bytes += bytes;
        if self.current_bytes > self.peak_bytes {
            self.peak_bytes = self.current_bytes;
        }
    }

    fn on_free(&mut self, bytes: usize) {
        self.current_bytes -= bytes;
    }
}

/// Logits plus the allocation accounting of the run that produced them.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Two channels: 0 = background, 1 = brain.
    pub logits: ActivationTensor,
    pub stats: ActivationStats,
}

/// Run the network over a single-pass volume tensor.
///
/// Each layer applies convolution → normalization → activation. Peak
/// activation memory is bounded by `2 · max_channels · X·Y·Z` scalars no
/// matter how deep the network is.
pub fn forward(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &ActivationTensor,
) -> Result<ForwardOutput> {
    spec.validate()?;
    weights.validate_against(spec)?;
    if input.channels() != spec.input_channels() {
        return Err(Error::ChannelMismatch {
            expected: spec.input_channels(),
            got: input.channels(),
        });
    }

    let shape = input.shape();
    let n = input.voxels();
    let max_c = spec.max_channels();
    let buf_scalars = max_c * n;
    let buf_bytes = buf_scalars * mem::size_of::<f32>();

    let mut stats = ActivationStats::default();

    let mut src: Vec<f32> = vec![0.0; buf_scalars];
    stats.on_alloc(buf_bytes);
    stats.buffers_allocated += 1;
    src[..input.data().len()].copy_from_slice(input.data());

    let mut dst: Vec<f32> = vec![0.0; buf_scalars];
    stats.on_alloc(buf_bytes);
    stats.buffers_allocated += 1;

    for (i, layer) in spec.layers.iter().enumerate() {
        let lw = &weights.layers[i];
        ops::conv_into(
            &src[..layer.in_channels * n],
            shape,
            layer,
            &lw.weight,
            lw.bias.as_deref(),
            &mut dst,
        );
        let active = &mut dst[..layer.out_channels * n];
        match layer.norm {
            Norm::None => {}
            Norm::ParamFreeLayerNorm => ops::layernorm_pf_in_place(active),
            Norm::BatchNormStats => {
                // validate_against guarantees the stats exist
                let bn = lw.bn_stats.as_ref().ok_or(Error::MissingStats { layer: i })?;
                ops::batchnorm_stats_in_place(active, n, bn);
            }
        }
        if layer.activation == crate::net::Activation::Relu {
            ops::relu_in_place(active);
        }
        mem::swap(&mut src, &mut dst);
    }

    // Release the spare buffer before materializing the logits so the peak
    // stays at exactly two working buffers.
    drop(dst);
    stats.on_free(buf_bytes);

    let out_c = spec.output_channels();
    let mut logits_data = vec![0.0f32; out_c * n];
    stats.on_alloc(logits_data.len() * mem::size_of::<f32>());
    logits_data.copy_from_slice(&src[..out_c * n]);
    drop(src);
    stats.on_free(buf_bytes);

    Ok(ForwardOutput {
        logits: Tensor::from_data(out_c, shape, logits_data)?,
        stats,
    })
}

/// Decide each voxel from two-channel logits: brain wins strict ties go to
/// background.
pub fn argmax_mask(logits: &ActivationTensor, grid: &Grid) -> Result<Mask> {
    if logits.channels() != 2 {
        return Err(Error::ChannelMismatch {
            expected: 2,
            got: logits.channels(),
        });
    }
    if logits.shape() != grid.shape {
        return Err(Error::ShapeMismatch {
            detail: alloc::format!(
                "logits {:?} vs grid {:?}",
                logits.shape(),
                grid.shape
            ),
        });
    }
    let n = logits.voxels();
    let bg = logits.channel(0);
    let brain = logits.channel(1);
    let mut data = vec![0u8; n];
    for i in 0..n {
        data[i] = u8::from(brain[i] > bg[i]);
    }
    Ok(Mask {
        grid: grid.clone(),
        data,
    })
}
