//! Declarative network specification, dilation schedules, and weight storage.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Normalization applied after each convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    None,
    /// Z-scoring of the whole layer tensor (channels and space jointly);
    /// no learned parameters.
    ParamFreeLayerNorm,
    /// Per-channel affine normalization with stored statistics
    /// (inference only).
    BatchNormStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

/// Epsilon used inside both normalization variants.
pub const NORM_EPSILON: f64 = 1e-5;

/// One convolution layer: kernel geometry, dilation, and what follows it.
///
/// Padding is implicitly `d·(k−1)/2` per side so every layer preserves the
/// spatial shape (the network is isometric).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub has_bias: bool,
    pub norm: Norm,
    pub activation: Activation,
}

impl ConvLayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidSpec("zero channel count".to_string()));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::InvalidSpec(format!(
                "kernel size must be odd and positive, got {}",
                self.kernel_size
            )));
        }
        if self.dilation == 0 {
            return Err(Error::InvalidSpec("dilation must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Zero padding per side that keeps the spatial shape.
    pub fn padding(&self) -> usize {
        self.dilation * (self.kernel_size - 1) / 2
    }

    /// Number of scalars in the weight tensor `[out][in][kx][ky][kz]`.
    pub fn weight_len(&self) -> usize {
        let k3 = self.kernel_size * self.kernel_size * self.kernel_size;
        self.out_channels * self.in_channels * k3
    }

    /// Scalars contributed to the parameter count:
    /// `out·in·k³ + (out if bias) + (4·out if stored batchnorm stats)`.
    pub fn param_count(&self) -> usize {
        let mut n = self.weight_len();
        if self.has_bias {
            n += self.out_channels;
        }
        if self.norm == Norm::BatchNormStats {
            n += 4 * self.out_channels;
        }
        n
    }
}

/// An ordered list of dilation factors.
///
/// Two block glyphs are recognized: `▶` for the decreasing run
/// 16→8→4→2→1 and `◀` for its increasing mirror.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DilationSchedule {
    pub dilations: Vec<usize>,
}

/// The decreasing block denoted `▶`.
pub const BLOCK_DEC: [usize; 5] = [16, 8, 4, 2, 1];
/// The increasing block denoted `◀`.
pub const BLOCK_INC: [usize; 5] = [1, 2, 4, 8, 16];

impl DilationSchedule {
    pub fn new(dilations: Vec<usize>) -> Result<Self> {
        if dilations.is_empty() {
            return Err(Error::InvalidSpec("empty dilation schedule".to_string()));
        }
        if dilations.iter().any(|&d| d == 0) {
            return Err(Error::InvalidSpec("dilation must be >= 1".to_string()));
        }
        Ok(DilationSchedule { dilations })
    }

    /// Concatenate block glyphs, e.g. `repeated_blocks(&[BLOCK_DEC; 2])` for `▶▶`.
    pub fn from_blocks(blocks: &[[usize; 5]]) -> Self {
        let mut dilations = Vec::with_capacity(blocks.len() * 5);
        for b in blocks {
            dilations.extend_from_slice(b);
        }
        DilationSchedule { dilations }
    }

    pub fn len(&self) -> usize {
        self.dilations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dilations.is_empty()
    }

    /// Render as block glyphs when the schedule is an exact concatenation of
    /// `▶`/`◀` blocks, otherwise as the plain number list.
    pub fn glyph(&self) -> String {
        if !self.dilations.is_empty() && self.dilations.len() % 5 == 0 {
            let mut out = String::new();
            for chunk in self.dilations.chunks(5) {
                if chunk == BLOCK_DEC {
                    out.push('\u{25B6}'); // ▶
                } else if chunk == BLOCK_INC {
                    out.push('\u{25C0}'); // ◀
                } else {
                    return self.plain();
                }
            }
            return out;
        }
        self.plain()
    }

    fn plain(&self) -> String {
        let parts: Vec<String> = self.dilations.iter().map(|d| d.to_string()).collect();
        parts.join("-")
    }
}

impl core::fmt::Display for DilationSchedule {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.glyph())
    }
}

/// An ordered stack of convolution layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub layers: Vec<ConvLayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<ConvLayerSpec>) -> Result<Self> {
        let spec = NetworkSpec { layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("no layers".to_string()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if i > 0 && layer.in_channels != self.layers[i - 1].out_channels {
                return Err(Error::InvalidSpec(format!(
                    "layer {} takes {} channels but layer {} emits {}",
                    i,
                    layer.in_channels,
                    i - 1,
                    self.layers[i - 1].out_channels
                )));
            }
        }
        Ok(())
    }

    /// The widest channel count any buffer must hold.
    pub fn max_channels(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.in_channels.max(l.out_channels))
            .max()
            .unwrap_or(0)
    }

    pub fn input_channels(&self) -> usize {
        self.layers.first().map(|l| l.in_channels).unwrap_or(0)
    }

    pub fn output_channels(&self) -> usize {
        self.layers.last().map(|l| l.out_channels).unwrap_or(0)
    }

    /// Total learned/stored scalar count.
    pub fn count_params(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Dilations of the k>1 backbone (the final 1-convolution, if any, does
    /// not blur and is excluded).
    pub fn dilation_schedule(&self) -> DilationSchedule {
        let dilations: Vec<usize> = self
            .layers
            .iter()
            .filter(|l| l.kernel_size > 1)
            .map(|l| l.dilation)
            .collect();
        DilationSchedule { dilations }
    }

    /// A stack of 3³ blur layers following `schedule`, `channels` wide, with
    /// the given normalization, closed by a biased 1-convolution onto two
    /// logit channels (background, brain). No biases in the backbone.
    pub fn block_net(schedule: &DilationSchedule, channels: usize, norm: Norm) -> Result<Self> {
        let mut layers = Vec::with_capacity(schedule.len() + 1);
        for (i, &d) in schedule.dilations.iter().enumerate() {
            layers.push(ConvLayerSpec {
                in_channels: if i == 0 { 1 } else { channels },
                out_channels: channels,
                kernel_size: 3,
                dilation: d,
                has_bias: false,
                norm,
                activation: Activation::Relu,
            });
        }
        layers.push(ConvLayerSpec {
            in_channels: channels,
            out_channels: 2,
            kernel_size: 1,
            dilation: 1,
            has_bias: true,
            norm: Norm::None,
            activation: Activation::None,
        });
        NetworkSpec::new(layers)
    }

    /// The published 26-layer model: five `▶` blocks (25 blur layers of
    /// 15 channels, parameter-free layer normalization, ReLU, no biases)
    /// plus the final two-channel 1-convolution. 146,237 parameters.
    pub fn mindgrab() -> Self {
        let schedule = DilationSchedule::from_blocks(&[BLOCK_DEC; 5]);
        Self::block_net(&schedule, 15, Norm::ParamFreeLayerNorm)
            .expect("builtin preset is valid")
    }

    /// Look up a named preset.
    ///
    /// `mindgrab` is the shipped architecture; `incdec`/`decinc`/`decdec`
    /// (◀▶ / ▶◀ / ▶▶, 15 channels) with `-ln`/`-bn` suffixes are the
    /// ablation variants; `toy` is a single 8-channel `▶` block for
    /// desk-scale training.
    pub fn preset(name: &str) -> Option<Self> {
        let build = |blocks: &[[usize; 5]], channels: usize, norm: Norm| {
            Self::block_net(&DilationSchedule::from_blocks(blocks), channels, norm).ok()
        };
        match name {
            "mindgrab" => Some(Self::mindgrab()),
            "incdec-ln" => build(&[BLOCK_INC, BLOCK_DEC], 15, Norm::ParamFreeLayerNorm),
            "incdec-bn" => build(&[BLOCK_INC, BLOCK_DEC], 15, Norm::BatchNormStats),
            "decinc-ln" => build(&[BLOCK_DEC, BLOCK_INC], 15, Norm::ParamFreeLayerNorm),
            "decinc-bn" => build(&[BLOCK_DEC, BLOCK_INC], 15, Norm::BatchNormStats),
            "decdec-ln" => build(&[BLOCK_DEC, BLOCK_DEC], 15, Norm::ParamFreeLayerNorm),
            "decdec-bn" => build(&[BLOCK_DEC, BLOCK_DEC], 15, Norm::BatchNormStats),
            "toy" => build(&[BLOCK_DEC], 8, Norm::ParamFreeLayerNorm),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &[
            "mindgrab",
            "incdec-ln",
            "incdec-bn",
            "decinc-ln",
            "decinc-bn",
            "decdec-ln",
            "decdec-bn",
            "toy",
        ]
    }
}

/// Stored per-channel statistics for a [`Norm::BatchNormStats`] layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub scale: Vec<f32>,
    pub shift: Vec<f32>,
}

/// Weights for one layer: the kernel tensor indexed `[out][in][kx][ky][kz]`
/// (row-major in that order), optional bias `[out]`, optional batchnorm
/// statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub weight: Vec<f32>,
    pub bias: Option<Vec<f32>>,
    pub bn_stats: Option<BnStats>,
}

/// All tensors that populate a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    pub layers: Vec<LayerWeights>,
}

impl WeightStore {
    /// All-zero tensors matching `spec` (biases and statistics included).
    pub fn zeroed(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .map(|l| LayerWeights {
                weight: vec![0.0; l.weight_len()],
                bias: l.has_bias.then(|| vec![0.0; l.out_channels]),
                bn_stats: (l.norm == Norm::BatchNormStats).then(|| BnStats {
                    mean: vec![0.0; l.out_channels],
                    var: vec![1.0; l.out_channels],
                    scale: vec![1.0; l.out_channels],
                    shift: vec![0.0; l.out_channels],
                }),
            })
            .collect();
        WeightStore { layers }
    }

    /// Check every tensor shape against `spec`.
    pub fn validate_against(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::WeightShapeMismatch {
                layer: 0,
                detail: format!(
                    "store has {} layers, spec has {}",
                    self.layers.len(),
                    spec.layers.len()
                ),
            });
        }
        for (i, (w, l)) in self.layers.iter().zip(&spec.layers).enumerate() {
            if w.weight.len() != l.weight_len() {
                return Err(Error::WeightShapeMismatch {
                    layer: i,
                    detail: format!(
                        "weight has {} scalars, expected {}",
                        w.weight.len(),
                        l.weight_len()
                    ),
                });
            }
            match (&w.bias, l.has_bias) {
                (Some(b), true) if b.len() != l.out_channels => {
                    return Err(Error::WeightShapeMismatch {
                        layer: i,
                        detail: format!("bias has {} scalars, expected {}", b.len(), l.out_channels),
                    });
                }
                (Some(_), false) => {
                    return Err(Error::WeightShapeMismatch {
                        layer: i,
                        detail: "unexpected bias".to_string(),
                    });
                }
                (None, true) => {
                    return Err(Error::WeightShapeMismatch {
                        layer: i,
                        detail: "missing bias".to_string(),
                    });
                }
                _ => {}
            }
            if l.norm == Norm::BatchNormStats {
                match &w.bn_stats {
                    None => return Err(Error::MissingStats { layer: i }),
                    Some(s) => {
                        let c = l.out_channels;
                        if s.mean.len() != c
                            || s.var.len() != c
                            || s.scale.len() != c
                            || s.shift.len() != c
                        {
                            return Err(Error::WeightShapeMismatch {
                                layer: i,
                                detail: "batchnorm statistics length".to_string(),
                            });
                        }
                    }
                }
            } else if w.bn_stats.is_some() {
                return Err(Error::WeightShapeMismatch {
                    layer: i,
                    detail: "unexpected batchnorm statistics".to_string(),
                });
            }
        }
        Ok(())
    }

    /// Total scalar count across all tensors.
    pub fn total_scalars(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weight.len()
                    + l.bias.as_ref().map_or(0, Vec::len)
                    + l.bn_stats
                        .as_ref()
                        .map_or(0, |s| s.mean.len() + s.var.len() + s.scale.len() + s.shift.len())
            })
            .sum()
    }
}
