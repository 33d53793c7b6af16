//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the engine, geometry, metrics, and training paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input tensor channel count does not match the layer it is fed to.
    ChannelMismatch { expected: usize, got: usize },
    /// A weight/bias/statistics tensor does not have the shape the network
    /// specification demands.
    WeightShapeMismatch { layer: usize, detail: String },
    /// The network specification itself is inconsistent (empty, broken
    /// channel chaining, even kernel, zero dilation, ...).
    InvalidSpec(String),
    /// A batchnorm layer was given no stored statistics.
    MissingStats { layer: usize },
    /// Voxel-to-world affine cannot be inverted.
    SingularAffine,
    /// Percentile normalization found no intensity spread (hi == lo).
    DegenerateIntensity,
    /// No voxel exceeded the crop threshold.
    EmptyForeground,
    /// A crop box does not fit inside the grid it indexes.
    BBoxOutOfRange,
    /// Two grids that must match (shape or geometry) do not.
    ShapeMismatch { detail: String },
    /// Surface-distance metrics are undefined for an empty mask.
    EmptyMask,
    /// A spectrum window shorter than the dilated kernel it should hold.
    KernelLargerThanWindow { kernel: usize, window: usize },
    /// Training produced a non-finite loss.
    DivergedLoss { step: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ChannelMismatch { expected, got } => {
                write!(f, "channel mismatch: expected {expected}, got {got}")
            }
            Error::WeightShapeMismatch { layer, detail } => {
                write!(f, "weight shape mismatch at layer {layer}: {detail}")
            }
            Error::InvalidSpec(detail) => write!(f, "invalid network spec: {detail}"),
            Error::MissingStats { layer } => {
                write!(f, "layer {layer} uses stored statistics but none were provided")
            }
            Error::SingularAffine => write!(f, "voxel-to-world affine is singular"),
            Error::DegenerateIntensity => {
                write!(f, "degenerate intensity range: percentiles coincide")
            }
            Error::EmptyForeground => write!(f, "no voxel above the crop threshold"),
            Error::BBoxOutOfRange => write!(f, "crop box outside the grid"),
            Error::ShapeMismatch { detail } => write!(f, "shape mismatch: {detail}"),
            Error::EmptyMask => write!(f, "mask is empty"),
            Error::KernelLargerThanWindow { kernel, window } => {
                write!(f, "dilated kernel ({kernel} taps) exceeds window ({window})")
            }
            Error::DivergedLoss { step } => write!(f, "loss diverged at step {step}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
