//! Voxel grids and voxel-to-world affine transforms.

use crate::error::{Error, Result};
use crate::math;

/// A 4×4 homogeneous voxel-to-world transform in millimeters.
///
/// The last row is always `[0, 0, 0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    rows: [[f64; 4]; 4],
}

impl Affine {
    pub fn identity() -> Self {
        Self::scaling([1.0, 1.0, 1.0])
    }

    /// Axis-aligned scaling (diagonal) affine, zero translation.
    pub fn scaling(s: [f64; 3]) -> Self {
        Affine {
            rows: [
                [s[0], 0.0, 0.0, 0.0],
                [0.0, s[1], 0.0, 0.0],
                [0.0, 0.0, s[2], 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
        }
    }

    /// Build from the three spatial rows; the homogeneous row is implied.
    pub fn from_spatial_rows(x: [f64; 4], y: [f64; 4], z: [f64; 4]) -> Self {
        Affine {
            rows: [x, y, z, [0.0, 0.0, 0.0, 1.0]],
        }
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.rows
    }

    pub fn translation(&self) -> [f64; 3] {
        [self.rows[0][3], self.rows[1][3], self.rows[2][3]]
    }

    pub fn set_translation(&mut self, t: [f64; 3]) {
        self.rows[0][3] = t[0];
        self.rows[1][3] = t[1];
        self.rows[2][3] = t[2];
    }

    /// Map a voxel coordinate to world space.
    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rows;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + r[0][3],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + r[1][3],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + r[2][3],
        ]
    }

    /// Compose `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Affine) -> Affine {
        let a = &self.rows;
        let b = &other.rows;
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Affine { rows: out }
    }

    /// Invert the transform. The 3×3 block is inverted by adjugate; a
    /// near-zero determinant is reported as [`Error::SingularAffine`].
    pub fn inverse(&self) -> Result<Affine> {
        let m = &self.rows;
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if math::abs(det) < 1e-12 {
            return Err(Error::SingularAffine);
        }
        let inv_det = 1.0 / det;
        let mut inv = [[0.0; 4]; 4];
        inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
        inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
        inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
        inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
        inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
        inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
        inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
        // Translation: t' = -R⁻¹ t.
        for i in 0..3 {
            inv[i][3] = -(inv[i][0] * m[0][3] + inv[i][1] * m[1][3] + inv[i][2] * m[2][3]);
        }
        inv[3] = [0.0, 0.0, 0.0, 1.0];
        Ok(Affine { rows: inv })
    }

    /// Euclidean norms of the three voxel-axis columns, i.e. the physical
    /// step per voxel along each grid axis.
    pub fn column_norms(&self) -> [f64; 3] {
        let m = &self.rows;
        let mut out = [0.0; 3];
        for (j, n) in out.iter_mut().enumerate() {
            *n = math::sqrt(m[0][j] * m[0][j] + m[1][j] * m[1][j] + m[2][j] * m[2][j]);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Affine) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max(math::abs(self.rows[i][j] - other.rows[i][j]));
            }
        }
        worst
    }
}

/// A 3D voxel grid: extents, physical spacing, and voxel-to-world affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Voxel extents `[X, Y, Z]`.
    pub shape: [usize; 3],
    /// Physical spacing per axis in mm.
    pub spacing: [f64; 3],
    /// Voxel-to-world transform (mm).
    pub affine: Affine,
}

impl Grid {
    pub fn new(shape: [usize; 3], spacing: [f64; 3], affine: Affine) -> Self {
        Grid {
            shape,
            spacing,
            affine,
        }
    }

    /// Axis-aligned grid at the given isotropic spacing, origin at zero.
    pub fn isotropic(shape: [usize; 3], spacing: f64) -> Self {
        Grid {
            shape,
            spacing: [spacing; 3],
            affine: Affine::scaling([spacing; 3]),
        }
    }

    pub fn voxel_count(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    /// World coordinates of the grid's field-of-view center (the centroid of
    /// all voxel centers).
    pub fn center_world(&self) -> [f64; 3] {
        let c = [
            (self.shape[0] as f64 - 1.0) / 2.0,
            (self.shape[1] as f64 - 1.0) / 2.0,
            (self.shape[2] as f64 - 1.0) / 2.0,
        ];
        self.affine.apply(c)
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.shape == other.shape
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.shape[1] + y) * self.shape[0] + x
    }
}
