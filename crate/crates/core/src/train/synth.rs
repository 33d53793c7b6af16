//! Synthetic (volume, mask) pairs: noisy ellipsoids on small grids.

use rand::Rng;

use crate::geom::Grid;
use crate::math;
use crate::tensor::Tensor;
use crate::volume::Mask;

/// Generator of bright ellipsoids on a dark, noisy background.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereTask {
    pub shape: [usize; 3],
    pub foreground: f64,
    pub background: f64,
    pub noise_sigma: f64,
    /// Semi-axis range as a fraction of the grid extent.
    pub radius_frac: (f64, f64),
}

impl SphereTask {
    pub fn new(shape: [usize; 3]) -> Self {
        SphereTask {
            shape,
            foreground: 0.9,
            background: 0.1,
            noise_sigma: 0.05,
            radius_frac: (0.2, 0.38),
        }
    }

    /// Draw one (volume, mask) pair. Intensities are clamped to [0, 1] to
    /// mimic percentile-normalized inputs.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Tensor<f64>, Mask) {
        let [nx, ny, nz] = self.shape;
        let center = [
            rng.random_range(0.35..0.65) * nx as f64,
            rng.random_range(0.35..0.65) * ny as f64,
            rng.random_range(0.35..0.65) * nz as f64,
        ];
        let radii = [
            rng.random_range(self.radius_frac.0..self.radius_frac.1) * nx as f64,
            rng.random_range(self.radius_frac.0..self.radius_frac.1) * ny as f64,
            rng.random_range(self.radius_frac.0..self.radius_frac.1) * nz as f64,
        ];
        let mut volume = Tensor::<f64>::zeros(1, self.shape);
        let mut mask = Mask::zeros(Grid::isotropic(self.shape, 1.0));
        let data = volume.data_mut();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let d = [
                        (x as f64 - center[0]) / radii[0],
                        (y as f64 - center[1]) / radii[1],
                        (z as f64 - center[2]) / radii[2],
                    ];
                    let inside = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= 1.0;
                    let idx = (z * ny + y) * nx + x;
                    let base = if inside { self.foreground } else { self.background };
                    data[idx] =
                        (base + standard_normal(rng) * self.noise_sigma).clamp(0.0, 1.0);
                    mask.data[idx] = u8::from(inside);
                }
            }
        }
        (volume, mask)
    }
}

/// Box–Muller standard normal draw.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}
