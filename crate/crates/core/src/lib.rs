//! Core engine for volumetric skull stripping with dilated 3D convolutions.
//!
//! This crate holds everything that computes: the declarative network
//! specification and its two-buffer inference engine, the geometry pipeline
//! that conforms arbitrary volumes onto the canonical 256³ 1 mm grid and maps
//! results back to native space, the frequency-domain design calculus for
//! dilation schedules, volumetric/surface agreement metrics, and a desk-scale
//! trainer with hand-rolled reverse-mode gradients.
//!
//! File formats, NIfTI I/O, and the command-line front end live in the
//! companion `mindgrab` crate; this crate is `no_std`-compatible (with
//! `alloc`) so the engine can be embedded in constrained targets such as
//! WebAssembly.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod geom;
pub mod math;
pub mod metrics;
pub mod net;
pub mod ops;
pub mod spectral;
pub mod tensor;
pub mod train;
pub mod volume;

pub use engine::{argmax_mask, forward, ActivationStats, ForwardOutput};
pub use error::{Error, Result};
pub use geom::{Affine, Grid};
pub use net::{
    Activation, ConvLayerSpec, DilationSchedule, LayerWeights, NetworkSpec, Norm, WeightStore,
};
pub use tensor::{ActivationTensor, Tensor};
pub use volume::{BBox, ConformTransform, Mask, NormalizationSpec, Volume};
