//! Volumetric and surface agreement between binary masks.
//!
//! Surface voxels are mask voxels with at least one of their six face
//! neighbors outside the mask (the grid border counts as outside). The mean
//! surface distance is symmetric: the average of the two directed means of
//! exact Euclidean point-to-surface distances in millimeters, computed with
//! a separable exact distance transform rather than a chamfer
//! approximation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::volume::Mask;

/// Voxelwise agreement counts, ground truth as reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    /// `2·tp / (2·tp + fp + fn)`; two empty masks agree perfectly (1).
    pub fn dice(&self) -> f64 {
        let denom = 2 * self.true_pos + self.false_pos + self.false_neg;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.true_pos as f64 / denom as f64
        }
    }

    /// `tp / (tp + fp)`; an empty prediction scores 0 against a nonempty
    /// reference and 1 against an empty one.
    pub fn precision(&self) -> f64 {
        let denom = self.true_pos + self.false_pos;
        if denom == 0 {
            if self.false_neg == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.true_pos as f64 / denom as f64
        }
    }

    /// `tp / (tp + fn)` with the mirrored empty-mask convention.
    pub fn recall(&self) -> f64 {
        let denom = self.true_pos + self.false_neg;
        if denom == 0 {
            if self.false_pos == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.true_pos as f64 / denom as f64
        }
    }
}

fn check_same_grid(pred: &Mask, gt: &Mask) -> Result<()> {
    if pred.grid.shape != gt.grid.shape {
        return Err(Error::ShapeMismatch {
            detail: format!("pred {:?} vs gt {:?}", pred.grid.shape, gt.grid.shape),
        });
    }
    Ok(())
}

/// Count voxelwise agreement on identical grids.
pub fn confusion(pred: &Mask, gt: &Mask) -> Result<Confusion> {
    check_same_grid(pred, gt)?;
    let mut c = Confusion {
        true_pos: 0,
        false_pos: 0,
        false_neg: 0,
        true_neg: 0,
    };
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        match (p != 0, g != 0) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(c)
}

pub fn dice(pred: &Mask, gt: &Mask) -> Result<f64> {
    Ok(confusion(pred, gt)?.dice())
}

pub fn precision(pred: &Mask, gt: &Mask) -> Result<f64> {
    Ok(confusion(pred, gt)?.precision())
}

pub fn recall(pred: &Mask, gt: &Mask) -> Result<f64> {
    Ok(confusion(pred, gt)?.recall())
}

/// Aggregate scores for one mask pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub dice: f64,
    pub precision: f64,
    pub recall: f64,
    /// Symmetric mean surface distance in mm.
    pub msd_mm: f64,
}

/// All four metrics in one pass; errors if either mask is empty (the
/// surface distance would be undefined).
pub fn evaluate(pred: &Mask, gt: &Mask) -> Result<MetricReport> {
    let c = confusion(pred, gt)?;
    let msd_mm = mean_surface_distance(pred, gt)?;
    Ok(MetricReport {
        dice: c.dice(),
        precision: c.precision(),
        recall: c.recall(),
        msd_mm,
    })
}

/// Mark mask voxels with a face neighbor outside the mask (or outside the
/// grid).
pub(crate) fn surface_voxels(mask: &Mask) -> Vec<bool> {
    let [nx, ny, nz] = mask.grid.shape;
    let idx = |x: usize, y: usize, z: usize| (z * ny + y) * nx + x;
    let mut surf = vec![false; mask.data.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.data[idx(x, y, z)] == 0 {
                    continue;
                }
                let exposed = x == 0
                    || mask.data[idx(x - 1, y, z)] == 0
                    || x + 1 == nx
                    || mask.data[idx(x + 1, y, z)] == 0
                    || y == 0
                    || mask.data[idx(x, y - 1, z)] == 0
                    || y + 1 == ny
                    || mask.data[idx(x, y + 1, z)] == 0
                    || z == 0
                    || mask.data[idx(x, y, z - 1)] == 0
                    || z + 1 == nz
                    || mask.data[idx(x, y, z + 1)] == 0;
                surf[idx(x, y, z)] = exposed;
            }
        }
    }
    surf
}

/// Sentinel for "no site yet" in the distance transform. Far larger than
/// any real squared distance yet safe to subtract without producing NaN.
const FAR: f64 = 1e20;

/// Exact 1D squared-distance transform (lower envelope of parabolas) with
/// physical sample spacing `s`.
fn dt1d(f: &[f64], s: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -FAR;
    z[1] = FAR;
    for q in 1..n {
        let qs = q as f64 * s;
        loop {
            let vs = v[k] as f64 * s;
            let sect = (f[q] + qs * qs - (f[v[k]] + vs * vs)) / (2.0 * qs - 2.0 * vs);
            if sect <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = sect;
            z[k + 1] = FAR;
            break;
        }
    }
    k = 0;
    for q in 0..n {
        let qs = q as f64 * s;
        while z[k + 1] < qs {
            k += 1;
        }
        let vs = v[k] as f64 * s;
        out[q] = (qs - vs) * (qs - vs) + f[v[k]];
    }
}

/// Squared Euclidean distance (mm²) from every voxel to the nearest `true`
/// site, via three separable passes.
pub(crate) fn squared_distance_field(
    sites: &[bool],
    shape: [usize; 3],
    spacing: [f64; 3],
) -> Vec<f64> {
    let [nx, ny, nz] = shape;
    let mut field: Vec<f64> = sites.iter().map(|&s| if s { 0.0 } else { FAR }).collect();

    let max_n = nx.max(ny).max(nz);
    let mut line = vec![0.0f64; max_n];
    let mut out = vec![0.0f64; max_n];
    let mut v = vec![0usize; max_n];
    let mut z = vec![0.0f64; max_n + 1];

    // x rows are contiguous
    for zi in 0..nz {
        for yi in 0..ny {
            let row = (zi * ny + yi) * nx;
            dt1d(&field[row..row + nx], spacing[0], &mut out[..nx], &mut v, &mut z);
            field[row..row + nx].copy_from_slice(&out[..nx]);
        }
    }
    // y columns
    for zi in 0..nz {
        for xi in 0..nx {
            for yi in 0..ny {
                line[yi] = field[(zi * ny + yi) * nx + xi];
            }
            dt1d(&line[..ny], spacing[1], &mut out[..ny], &mut v, &mut z);
            for yi in 0..ny {
                field[(zi * ny + yi) * nx + xi] = out[yi];
            }
        }
    }
    // z columns
    for yi in 0..ny {
        for xi in 0..nx {
            for zi in 0..nz {
                line[zi] = field[(zi * ny + yi) * nx + xi];
            }
            dt1d(&line[..nz], spacing[2], &mut out[..nz], &mut v, &mut z);
            for zi in 0..nz {
                field[(zi * ny + yi) * nx + xi] = out[zi];
            }
        }
    }
    field
}

fn directed_mean_surface_distance(
    from_surf: &[bool],
    to_sqdist: &[f64],
) -> Option<f64> {
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (i, &s) in from_surf.iter().enumerate() {
        if s {
            sum += math::sqrt(to_sqdist[i]);
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Symmetric mean surface distance in mm between two nonempty masks on the
/// same grid.
pub fn mean_surface_distance(pred: &Mask, gt: &Mask) -> Result<f64> {
    check_same_grid(pred, gt)?;
    if pred.grid.spacing != gt.grid.spacing {
        return Err(Error::ShapeMismatch {
            detail: format!(
                "spacing {:?} vs {:?}",
                pred.grid.spacing, gt.grid.spacing
            ),
        });
    }
    let shape = gt.grid.shape;
    let spacing = gt.grid.spacing;
    let ps = surface_voxels(pred);
    let gs = surface_voxels(gt);
    let d_to_g = squared_distance_field(&gs, shape, spacing);
    let d_to_p = squared_distance_field(&ps, shape, spacing);
    let pred_to_gt = directed_mean_surface_distance(&ps, &d_to_g).ok_or(Error::EmptyMask)?;
    let gt_to_pred = directed_mean_surface_distance(&gs, &d_to_p).ok_or(Error::EmptyMask)?;
    Ok(0.5 * (pred_to_gt + gt_to_pred))
}
