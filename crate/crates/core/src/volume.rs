//! Geometry and intensity preprocessing.
//!
//! The inference grid is canonical: 256³ voxels at 1 mm isotropic spacing,
//! axis-aligned in RAS world coordinates and centered on the input's field
//! of view. [`conform`] resamples anything onto that grid and records how to
//! get back; [`mask_to_native`] applies the inverse so results always land
//! on the caller's original grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{Affine, Grid};
use crate::math;

/// A scalar volume on a [`Grid`]; data in x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub grid: Grid,
    pub data: Vec<f32>,
}

/// A binary volume; every voxel is 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub grid: Grid,
    pub data: Vec<u8>,
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.voxel_count() {
            return Err(Error::ShapeMismatch {
                detail: format!(
                    "volume data length {} != grid voxels {}",
                    data.len(),
                    grid.voxel_count()
                ),
            });
        }
        if grid.spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::ShapeMismatch {
                detail: "non-positive voxel spacing".into(),
            });
        }
        Ok(Volume { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.voxel_count();
        Volume {
            grid,
            data: vec![0.0; n],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.index(x, y, z)]
    }
}

impl Mask {
    pub fn new(grid: Grid, data: Vec<u8>) -> Result<Self> {
        if data.len() != grid.voxel_count() {
            return Err(Error::ShapeMismatch {
                detail: format!(
                    "mask data length {} != grid voxels {}",
                    data.len(),
                    grid.voxel_count()
                ),
            });
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::ShapeMismatch {
                detail: "mask voxels must be 0 or 1".into(),
            });
        }
        Ok(Mask { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.voxel_count();
        Mask {
            grid,
            data: vec![0; n],
        }
    }

    /// Number of foreground voxels.
    pub fn volume_voxels(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }
}

/// Canonical inference grid extent (voxels per axis).
pub const CONFORM_SHAPE: usize = 256;
/// Canonical inference spacing (mm, isotropic).
pub const CONFORM_SPACING: f64 = 1.0;

/// Default foreground threshold for [`compute_crop_bbox`], applied to
/// percentile-normalized intensities.
pub const DEFAULT_CROP_THRESHOLD: f32 = 0.05;
/// Default crop margin in voxels per side.
pub const DEFAULT_CROP_MARGIN: usize = 8;

/// Record of a conform call: enough to map results back to native space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformTransform {
    pub native: Grid,
    pub conformed: Grid,
    /// Set when the fast path cropped the conformed grid before inference.
    pub crop_bbox: Option<BBox>,
}

/// Percentile window for intensity normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationSpec {
    pub lo_percentile: f64,
    pub hi_percentile: f64,
    /// Compute percentiles over nonzero voxels only.
    pub nonzero_only: bool,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        NormalizationSpec {
            lo_percentile: 2.0,
            hi_percentile: 98.0,
            nonzero_only: false,
        }
    }
}

impl NormalizationSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lo_percentile >= 0.0
            && self.lo_percentile < self.hi_percentile
            && self.hi_percentile <= 100.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "percentile window [{}, {}] out of order",
                self.lo_percentile, self.hi_percentile
            )))
        }
    }
}

/// Half-open voxel box `[lo, hi)` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl BBox {
    pub fn shape(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0],
            self.hi[1] - self.lo[1],
            self.hi[2] - self.lo[2],
        ]
    }

    pub fn voxel_count(&self) -> usize {
        let s = self.shape();
        s[0] * s[1] * s[2]
    }

    pub fn full(shape: [usize; 3]) -> Self {
        BBox {
            lo: [0, 0, 0],
            hi: shape,
        }
    }

    fn check_within(&self, shape: [usize; 3]) -> Result<()> {
        for a in 0..3 {
            if self.lo[a] >= self.hi[a] || self.hi[a] > shape[a] {
                return Err(Error::BBoxOutOfRange);
            }
        }
        Ok(())
    }
}

/// Trilinear resampling of `src` onto `dst_grid`; voxels that fall outside
/// the source field of view read as zero.
fn resample_trilinear(src: &Volume, dst_grid: &Grid) -> Result<Volume> {
    // dst voxel -> world -> src voxel
    let map = src.grid.affine.inverse()?.compose(&dst_grid.affine);
    let [sx, sy, sz] = src.grid.shape;
    let [nx, ny, _] = dst_grid.shape;
    let mut data = vec![0.0f32; dst_grid.voxel_count()];

    let slab = |z: usize, out: &mut [f32]| {
        for y in 0..ny {
            let row = y * nx;
            for x in 0..nx {
                let v = map.apply([x as f64, y as f64, z as f64]);
                out[row + x] = sample_trilinear(src, [sx, sy, sz], v);
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(nx * ny)
            .enumerate()
            .for_each(|(z, chunk)| slab(z, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    for (z, chunk) in data.chunks_mut(nx * ny).enumerate() {
        slab(z, chunk);
    }

    Volume::new(dst_grid.clone(), data)
}

#[inline]
fn sample_trilinear(src: &Volume, shape: [usize; 3], v: [f64; 3]) -> f32 {
    let x0 = math::floor(v[0]);
    let y0 = math::floor(v[1]);
    let z0 = math::floor(v[2]);
    let fx = v[0] - x0;
    let fy = v[1] - y0;
    let fz = v[2] - z0;
    let (ix, iy, iz) = (x0 as isize, y0 as isize, z0 as isize);

    let mut acc = 0.0f64;
    for dz in 0..2 {
        let wz = if dz == 0 { 1.0 - fz } else { fz };
        if wz == 0.0 {
            continue;
        }
        let z = iz + dz;
        if z < 0 || z >= shape[2] as isize {
            continue;
        }
        for dy in 0..2 {
            let wy = if dy == 0 { 1.0 - fy } else { fy };
            if wy == 0.0 {
                continue;
            }
            let y = iy + dy;
            if y < 0 || y >= shape[1] as isize {
                continue;
            }
            let base = (z as usize * shape[1] + y as usize) * shape[0];
            for dx in 0..2 {
                let wx = if dx == 0 { 1.0 - fx } else { fx };
                if wx == 0.0 {
                    continue;
                }
                let x = ix + dx;
                if x < 0 || x >= shape[0] as isize {
                    continue;
                }
                acc += wz * wy * wx * src.data[base + x as usize] as f64;
            }
        }
    }
    acc as f32
}

/// Resample onto the canonical 256³, 1 mm, RAS grid centered on the input
/// field of view.
pub fn conform(volume: &Volume) -> Result<(Volume, ConformTransform)> {
    conform_to(volume, CONFORM_SHAPE, CONFORM_SPACING)
}

/// [`conform`] with an explicit target extent/spacing (useful for tests at
/// smaller scales; inference always uses the canonical values).
pub fn conform_to(volume: &Volume, size: usize, spacing: f64) -> Result<(Volume, ConformTransform)> {
    let center = volume.grid.center_world();
    let half_span = spacing * (size as f64 - 1.0) / 2.0;
    let mut affine = Affine::scaling([spacing; 3]);
    affine.set_translation([
        center[0] - half_span,
        center[1] - half_span,
        center[2] - half_span,
    ]);
    let dst_grid = Grid::new([size; 3], [spacing; 3], affine);
    let out = resample_trilinear(volume, &dst_grid)?;
    let transform = ConformTransform {
        native: volume.grid.clone(),
        conformed: dst_grid,
        crop_bbox: None,
    };
    Ok((out, transform))
}

/// Map intensities through the percentile window:
/// `clamp((v − p_lo) / (p_hi − p_lo), 0, 1)` with linearly interpolated
/// order statistics.
pub fn normalize_percentile(volume: &Volume, spec: &NormalizationSpec) -> Result<Volume> {
    spec.validate()?;
    let mut sorted: Vec<f32> = if spec.nonzero_only {
        volume.data.iter().copied().filter(|&v| v != 0.0).collect()
    } else {
        volume.data.clone()
    };
    if sorted.is_empty() {
        return Err(Error::DegenerateIntensity);
    }

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        sorted.par_sort_unstable_by(f32::total_cmp);
    }
    #[cfg(not(feature = "parallel"))]
    sorted.sort_unstable_by(f32::total_cmp);

    let lo = percentile_of_sorted(&sorted, spec.lo_percentile);
    let hi = percentile_of_sorted(&sorted, spec.hi_percentile);
    if !(hi > lo) {
        return Err(Error::DegenerateIntensity);
    }
    let span = hi - lo;
    let data = volume
        .data
        .iter()
        .map(|&v| (((v as f64 - lo) / span).clamp(0.0, 1.0)) as f32)
        .collect();
    Volume::new(volume.grid.clone(), data)
}

/// Linearly interpolated order statistic of an ascending slice.
pub fn percentile_of_sorted(sorted: &[f32], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = q / 100.0 * (sorted.len() as f64 - 1.0);
    let lo = math::floor(rank).clamp(0.0, sorted.len() as f64 - 1.0) as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        sorted[lo] as f64
    } else {
        sorted[lo] as f64 * (1.0 - frac) + sorted[lo + 1] as f64 * frac
    }
}

/// Tight bounds of voxels above `threshold`, dilated by `margin` voxels per
/// side and clamped to the grid. The input is expected to be
/// percentile-normalized so the threshold is on a [0, 1] scale.
pub fn compute_crop_bbox(volume: &Volume, threshold: f32, margin: usize) -> Result<BBox> {
    let [nx, ny, nz] = volume.grid.shape;
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for z in 0..nz {
        for y in 0..ny {
            let row = (z * ny + y) * nx;
            for x in 0..nx {
                if volume.data[row + x] > threshold {
                    any = true;
                    let p = [x, y, z];
                    for a in 0..3 {
                        lo[a] = lo[a].min(p[a]);
                        hi[a] = hi[a].max(p[a]);
                    }
                }
            }
        }
    }
    if !any {
        return Err(Error::EmptyForeground);
    }
    let shape = volume.grid.shape;
    let mut bb = BBox {
        lo: [0; 3],
        hi: [0; 3],
    };
    for a in 0..3 {
        bb.lo[a] = lo[a].saturating_sub(margin);
        bb.hi[a] = (hi[a] + 1 + margin).min(shape[a]);
    }
    Ok(bb)
}

fn crop_grid(grid: &Grid, bbox: &BBox) -> Grid {
    let mut offset = Affine::identity();
    offset.set_translation([bbox.lo[0] as f64, bbox.lo[1] as f64, bbox.lo[2] as f64]);
    Grid::new(bbox.shape(), grid.spacing, grid.affine.compose(&offset))
}

/// Extract the box; the cropped volume keeps a consistent world position.
pub fn crop(volume: &Volume, bbox: &BBox) -> Result<Volume> {
    bbox.check_within(volume.grid.shape)?;
    let data = copy_box(&volume.data, volume.grid.shape, bbox);
    Volume::new(crop_grid(&volume.grid, bbox), data)
}

/// [`crop`] for masks.
pub fn crop_mask(mask: &Mask, bbox: &BBox) -> Result<Mask> {
    bbox.check_within(mask.grid.shape)?;
    let data = copy_box(&mask.data, mask.grid.shape, bbox);
    Mask::new(crop_grid(&mask.grid, bbox), data)
}

fn copy_box<T: Copy + Default>(data: &[T], shape: [usize; 3], bbox: &BBox) -> Vec<T> {
    let [nx, ny, _] = shape;
    let bs = bbox.shape();
    let mut out = Vec::with_capacity(bbox.voxel_count());
    for z in bbox.lo[2]..bbox.hi[2] {
        for y in bbox.lo[1]..bbox.hi[1] {
            let row = (z * ny + y) * nx;
            out.extend_from_slice(&data[row + bbox.lo[0]..row + bbox.hi[0]]);
        }
    }
    debug_assert_eq!(out.len(), bs[0] * bs[1] * bs[2]);
    out
}

/// Place a cropped mask back at its original coordinates on `full_grid`,
/// zero elsewhere.
pub fn embed(mask: &Mask, bbox: &BBox, full_grid: &Grid) -> Result<Mask> {
    bbox.check_within(full_grid.shape)?;
    if mask.grid.shape != bbox.shape() {
        return Err(Error::ShapeMismatch {
            detail: format!(
                "mask shape {:?} != bbox shape {:?}",
                mask.grid.shape,
                bbox.shape()
            ),
        });
    }
    let [nx, ny, _] = full_grid.shape;
    let bs = bbox.shape();
    let mut data = vec![0u8; full_grid.voxel_count()];
    for z in 0..bs[2] {
        for y in 0..bs[1] {
            let src = (z * bs[1] + y) * bs[0];
            let dst = ((z + bbox.lo[2]) * ny + y + bbox.lo[1]) * nx + bbox.lo[0];
            data[dst..dst + bs[0]].copy_from_slice(&mask.data[src..src + bs[0]]);
        }
    }
    Mask::new(full_grid.clone(), data)
}

/// Nearest-neighbor resample of a conformed-grid mask back onto the native
/// grid recorded in `transform`. Nearest-neighbor preserves binarity.
pub fn mask_to_native(mask: &Mask, transform: &ConformTransform) -> Result<Mask> {
    if mask.grid.shape != transform.conformed.shape {
        return Err(Error::ShapeMismatch {
            detail: format!(
                "mask shape {:?} is not the conformed grid {:?}",
                mask.grid.shape, transform.conformed.shape
            ),
        });
    }
    let map = transform
        .conformed
        .affine
        .inverse()?
        .compose(&transform.native.affine);
    let [cx, cy, cz] = transform.conformed.shape;
    let [nx, ny, nz] = transform.native.shape;
    let mut data = vec![0u8; transform.native.voxel_count()];
    for z in 0..nz {
        for y in 0..ny {
            let row = (z * ny + y) * nx;
            for x in 0..nx {
                let v = map.apply([x as f64, y as f64, z as f64]);
                let ix = math::round(v[0]) as isize;
                let iy = math::round(v[1]) as isize;
                let iz = math::round(v[2]) as isize;
                if ix >= 0
                    && iy >= 0
                    && iz >= 0
                    && (ix as usize) < cx
                    && (iy as usize) < cy
                    && (iz as usize) < cz
                {
                    data[row + x] =
                        mask.data[((iz as usize * cy) + iy as usize) * cx + ix as usize];
                }
            }
        }
    }
    Mask::new(transform.native.clone(), data)
}

/// Voxelwise product of a volume and a mask on the same grid.
pub fn apply_mask(volume: &Volume, mask: &Mask) -> Result<Volume> {
    if volume.grid.shape != mask.grid.shape {
        return Err(Error::ShapeMismatch {
            detail: format!(
                "volume {:?} vs mask {:?}",
                volume.grid.shape, mask.grid.shape
            ),
        });
    }
    let data = volume
        .data
        .iter()
        .zip(&mask.data)
        .map(|(&v, &m)| if m != 0 { v } else { 0.0 })
        .collect();
    Volume::new(volume.grid.clone(), data)
}
