//! Metrics against brute-force oracles on random small masks.
//!
//! The oracle counts confusion entries with a triple loop and computes the
//! mean surface distance by scanning all surface-voxel pairs (O(n²)),
//! independent of the distance-transform path under test.

use mindgrab_core::geom::Grid;
use mindgrab_core::metrics::{confusion, dice, mean_surface_distance, precision, recall};
use mindgrab_core::volume::Mask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_blob_mask<R: Rng>(rng: &mut R, shape: [usize; 3], spacing: [f64; 3]) -> Mask {
    let grid = Grid::new(
        shape,
        spacing,
        mindgrab_core::geom::Affine::scaling(spacing),
    );
    let mut m = Mask::zeros(grid);
    // union of a couple of random boxes plus voxel noise
    for _ in 0..rng.random_range(1..3) {
        let lo = [
            rng.random_range(0..shape[0]),
            rng.random_range(0..shape[1]),
            rng.random_range(0..shape[2]),
        ];
        let hi = [
            rng.random_range(lo[0]..=shape[0].min(lo[0] + 8)),
            rng.random_range(lo[1]..=shape[1].min(lo[1] + 8)),
            rng.random_range(lo[2]..=shape[2].min(lo[2] + 8)),
        ];
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    let idx = m.grid.index(x, y, z);
                    m.data[idx] = 1;
                }
            }
        }
    }
    for v in m.data.iter_mut() {
        if rng.random_range(0..40) == 0 {
            *v ^= 1;
        }
    }
    m
}

struct OracleCounts {
    tp: u64,
    fp: u64,
    fne: u64,
    tn: u64,
}

fn oracle_confusion(pred: &Mask, gt: &Mask) -> OracleCounts {
    let [nx, ny, nz] = gt.grid.shape;
    let mut c = OracleCounts {
        tp: 0,
        fp: 0,
        fne: 0,
        tn: 0,
    };
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = gt.grid.index(x, y, z);
                match (pred.data[i] != 0, gt.data[i] != 0) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fne += 1,
                    (false, false) => c.tn += 1,
                }
            }
        }
    }
    c
}

fn oracle_surface(mask: &Mask) -> Vec<[usize; 3]> {
    let [nx, ny, nz] = mask.grid.shape;
    let inside = |x: isize, y: isize, z: isize| -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < nx
            && (y as usize) < ny
            && (z as usize) < nz
            && mask.data[mask.grid.index(x as usize, y as usize, z as usize)] != 0
    };
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.data[mask.grid.index(x, y, z)] == 0 {
                    continue;
                }
                let (xi, yi, zi) = (x as isize, y as isize, z as isize);
                let exposed = !inside(xi - 1, yi, zi)
                    || !inside(xi + 1, yi, zi)
                    || !inside(xi, yi - 1, zi)
                    || !inside(xi, yi + 1, zi)
                    || !inside(xi, yi, zi - 1)
                    || !inside(xi, yi, zi + 1);
                if exposed {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

fn oracle_msd(pred: &Mask, gt: &Mask) -> Option<f64> {
    let sp = gt.grid.spacing;
    let ps = oracle_surface(pred);
    let gs = oracle_surface(gt);
    if ps.is_empty() || gs.is_empty() {
        return None;
    }
    let directed = |from: &[[usize; 3]], to: &[[usize; 3]]| -> f64 {
        let mut sum = 0.0;
        for a in from {
            let mut best = f64::MAX;
            for b in to {
                let d = ((a[0] as f64 - b[0] as f64) * sp[0]).powi(2)
                    + ((a[1] as f64 - b[1] as f64) * sp[1]).powi(2)
                    + ((a[2] as f64 - b[2] as f64) * sp[2]).powi(2);
                best = best.min(d);
            }
            sum += best.sqrt();
        }
        sum / from.len() as f64
    };
    Some(0.5 * (directed(&ps, &gs) + directed(&gs, &ps)))
}

#[test]
fn metrics_match_bruteforce_oracles_on_random_pairs() {
    let mut rng = ChaCha12Rng::seed_from_u64(20240811);
    let mut msd_checked = 0;
    for case in 0..30 {
        let shape = [
            rng.random_range(4..=16),
            rng.random_range(4..=16),
            rng.random_range(4..=16),
        ];
        let spacing = [
            rng.random_range(0.5..3.0),
            rng.random_range(0.5..3.0),
            rng.random_range(0.5..3.0),
        ];
        let pred = random_blob_mask(&mut rng, shape, spacing);
        let gt = random_blob_mask(&mut rng, shape, spacing);

        let c = confusion(&pred, &gt).unwrap();
        let oc = oracle_confusion(&pred, &gt);
        assert_eq!(
            (c.true_pos, c.false_pos, c.false_neg, c.true_neg),
            (oc.tp, oc.fp, oc.fne, oc.tn),
            "case {case}"
        );
        assert_eq!(c.total() as usize, gt.data.len());

        let d = dice(&pred, &gt).unwrap();
        let oracle_d = if 2 * oc.tp + oc.fp + oc.fne == 0 {
            1.0
        } else {
            2.0 * oc.tp as f64 / (2 * oc.tp + oc.fp + oc.fne) as f64
        };
        assert_eq!(d, oracle_d, "case {case}");
        assert!((0.0..=1.0).contains(&d));
        assert_eq!(precision(&pred, &gt).unwrap(), recall(&gt, &pred).unwrap());

        if let Some(want) = oracle_msd(&pred, &gt) {
            let got = mean_surface_distance(&pred, &gt).unwrap();
            assert!(
                (got - want).abs() < 1e-6,
                "case {case}: msd {got} vs oracle {want}"
            );
            msd_checked += 1;
        }
    }
    assert!(msd_checked >= 25, "only {msd_checked} msd cases were nonempty");
}
