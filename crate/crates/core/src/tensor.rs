//! Multi-channel activation tensors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense channel-major tensor over a 3D grid.
///
/// Layout: `data[((c·Z + z)·Y + y)·X + x]` — x varies fastest within a
/// channel, matching the voxel order of [`crate::volume::Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    channels: usize,
    shape: [usize; 3],
    data: Vec<T>,
}

/// The inference engine's working dtype is 32-bit.
pub type ActivationTensor = Tensor<f32>;

impl<T: Copy + Default> Tensor<T> {
    pub fn zeros(channels: usize, shape: [usize; 3]) -> Self {
        Tensor {
            channels,
            shape,
            data: vec![T::default(); channels * shape[0] * shape[1] * shape[2]],
        }
    }
}

impl<T> Tensor<T> {
    pub fn from_data(channels: usize, shape: [usize; 3], data: Vec<T>) -> Result<Self> {
        let expected = channels * shape[0] * shape[1] * shape[2];
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                detail: alloc::format!(
                    "tensor data length {} != {}x{}x{}x{}",
                    data.len(),
                    channels,
                    shape[0],
                    shape[1],
                    shape[2]
                ),
            });
        }
        Ok(Tensor {
            channels,
            shape,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    /// Voxels per channel.
    pub fn voxels(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.voxels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.voxels();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        ((c * self.shape[2] + z) * self.shape[1] + y) * self.shape[0] + x
    }

    #[inline]
    pub fn at(&self, c: usize, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.index(c, x, y, z)]
    }
}

impl Tensor<f32> {
    pub fn to_f64(&self) -> Tensor<f64> {
        Tensor {
            channels: self.channels,
            shape: self.shape,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

impl Tensor<f64> {
    pub fn to_f32(&self) -> Tensor<f32> {
        Tensor {
            channels: self.channels,
            shape: self.shape,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }
}
