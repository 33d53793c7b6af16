//! Acceptance suite: one test per shipping criterion, each at its stated
//! tolerance, printing one PASS line (visible with `--nocapture`; the
//! test-runner line itself is the pass/fail record otherwise).

use std::path::Path;

use mindgrab::nifti::{read_nifti, read_nifti_bytes, volume_to_bytes, write_nifti_volume};
use mindgrab::weights::{save_weight_files, save_weights};
use mindgrab_core::engine::forward;
use mindgrab_core::geom::{Affine, Grid};
use mindgrab_core::metrics;
use mindgrab_core::net::{
    Activation, ConvLayerSpec, DilationSchedule, NetworkSpec, Norm, WeightStore,
};
use mindgrab_core::ops::dilated_conv3d;
use mindgrab_core::spectral::{discussion_schedules, kernel_spectrum, receptive_field, schedule_report};
use mindgrab_core::tensor::Tensor;
use mindgrab_core::train;
use mindgrab_core::volume::{Mask, Volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[test]
fn acceptance_01_parameter_count_and_blob_size() {
    let spec = NetworkSpec::mindgrab();
    assert_eq!(spec.count_params(), 146_237);
    let store = WeightStore::zeroed(&spec);
    let (manifest, blob) = save_weights(&spec, &store).unwrap();
    assert_eq!(blob.len(), 584_948);
    assert_eq!(manifest.blob_bytes, 584_948);
    println!("PASS 01: parameter count 146237, blob 584948 bytes");
}

#[test]
fn acceptance_02_receptive_field_reproduction() {
    let rf = |dils: &[usize]| {
        receptive_field(&DilationSchedule::new(dils.to_vec()).unwrap(), 3)
            .rf
            .to_string()
    };
    let context_agg = rf(&[1, 1, 2, 4, 8, 16, 1, 1]);
    assert_eq!(context_agg, "6299");
    assert!(context_agg.parse::<u64>().unwrap() > 4_000);

    assert_eq!(rf(&[16, 8, 4, 2, 1, 16, 8, 4, 2, 1]), "5543203");
    assert_eq!(rf(&[16, 8, 4, 2, 1, 1, 2, 4, 8, 16]), "2256163");

    let five_blocks: u64 = rf(&[[16usize, 8, 4, 2, 1]; 5].concat()).parse().unwrap();
    assert!(
        (5.9e15..=6.0e15).contains(&(five_blocks as f64)),
        "five-block rf {five_blocks}"
    );

    let incdec9: u64 = rf(&[1, 2, 4, 8, 16, 8, 4, 2, 1]).parse().unwrap();
    assert!(incdec9.abs_diff(346_264) <= 2, "incdec rf {incdec9}");

    // the discrepancy must be flagged in the report output
    let rows = schedule_report(&discussion_schedules(), 3);
    let incdec_row = rows.iter().find(|r| r.name == "incdec").unwrap();
    assert!(incdec_row.note.contains("DIFFERS"), "{}", incdec_row.note);
    assert!(incdec_row.note.contains("346264"));
    println!("PASS 02: receptive fields 6299 / 5543203 / 2256163 / {five_blocks} / {incdec9} (flagged)");
}

/// Independent oracle: expand the dilated kernel with zero insertion, run
/// a naive dense convolution in f64.
fn dense_zero_inserted_oracle(
    input: &Tensor<f32>,
    l: &ConvLayerSpec,
    weight: &[f32],
) -> Vec<f32> {
    let [nx, ny, nz] = input.shape();
    let (k, d) = (l.kernel_size, l.dilation);
    let r = 1 + (k - 1) * d;
    let pad = ((r - 1) / 2) as isize;
    let mut out = vec![0.0f32; l.out_channels * input.voxels()];
    for oc in 0..l.out_channels {
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut acc = 0.0f64;
                    for ic in 0..l.in_channels {
                        for kx in 0..k {
                            for ky in 0..k {
                                for kz in 0..k {
                                    let w = weight
                                        [(((oc * l.in_channels + ic) * k + kx) * k + ky) * k + kz];
                                    let sx = x as isize + (kx * d) as isize - pad;
                                    let sy = y as isize + (ky * d) as isize - pad;
                                    let sz = z as isize + (kz * d) as isize - pad;
                                    if sx < 0
                                        || sy < 0
                                        || sz < 0
                                        || sx >= nx as isize
                                        || sy >= ny as isize
                                        || sz >= nz as isize
                                    {
                                        continue;
                                    }
                                    acc += w as f64
                                        * *input.at(ic, sx as usize, sy as usize, sz as usize)
                                            as f64;
                                }
                            }
                        }
                    }
                    out[((oc * nz + z) * ny + y) * nx + x] = acc as f32;
                }
            }
        }
    }
    out
}

#[test]
fn acceptance_03_convolution_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(303);
    for case in 0..200 {
        let shape = [
            rng.random_range(1..=9usize),
            rng.random_range(1..=9usize),
            rng.random_range(1..=9usize),
        ];
        let l = ConvLayerSpec {
            in_channels: rng.random_range(1..=3),
            out_channels: rng.random_range(1..=3),
            kernel_size: if rng.random_range(0..5) == 0 { 1 } else { 3 },
            dilation: rng.random_range(1..=3),
            has_bias: false,
            norm: Norm::None,
            activation: Activation::None,
        };
        let n = l.in_channels * shape[0] * shape[1] * shape[2];
        let input = Tensor::from_data(
            l.in_channels,
            shape,
            (0..n).map(|_| rng.random_range(-1.0..1.0f32)).collect(),
        )
        .unwrap();
        let weight: Vec<f32> = (0..l.weight_len())
            .map(|_| rng.random_range(-1.0..1.0f32))
            .collect();

        let got = dilated_conv3d(&input, &l, &weight, None).unwrap();
        let want = dense_zero_inserted_oracle(&input, &l, &weight);
        let scale = want.iter().fold(0.0f64, |m, &v| m.max(v.abs() as f64)).max(1e-12);
        let err = got
            .data()
            .iter()
            .zip(&want)
            .fold(0.0f64, |m, (&a, &b)| m.max((a as f64 - b as f64).abs()))
            / scale;
        assert!(err < 1e-5, "case {case}: relative error {err}");
    }
    println!("PASS 03: 200 random dilated convolutions match the dense oracle within 1e-5");
}

#[test]
fn acceptance_04_spectral_aliasing_identity() {
    let n = 128;
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    for case in 0..50 {
        let taps = [
            rng.random_range(-1.0..1.0f64),
            rng.random_range(-1.0..1.0f64),
            rng.random_range(-1.0..1.0f64),
        ];
        let base = kernel_spectrum(&taps, 1, n).unwrap();
        for d in [1usize, 2, 4, 8, 16] {
            let env = kernel_spectrum(&taps, d, n).unwrap();
            for m in 0..n {
                let delta = (env.magnitudes[m] - base.magnitudes[(d * m) % n]).abs();
                assert!(delta < 1e-9, "case {case}, d {d}, bin {m}: {delta}");
            }
        }
    }
    println!("PASS 04: aliasing identity holds within 1e-9 for 50 kernels x 5 dilations");
}

#[test]
fn acceptance_05_gradient_check() {
    // three-layer toy net on a 9^3 input; h = 1e-6 keeps the f64 central
    // difference in its accurate regime for the relu/layernorm stack
    let spec = NetworkSpec::new(vec![
        ConvLayerSpec {
            in_channels: 1,
            out_channels: 3,
            kernel_size: 3,
            dilation: 1,
            has_bias: false,
            norm: Norm::ParamFreeLayerNorm,
            activation: Activation::Relu,
        },
        ConvLayerSpec {
            in_channels: 3,
            out_channels: 3,
            kernel_size: 3,
            dilation: 2,
            has_bias: false,
            norm: Norm::ParamFreeLayerNorm,
            activation: Activation::Relu,
        },
        ConvLayerSpec {
            in_channels: 3,
            out_channels: 2,
            kernel_size: 1,
            dilation: 1,
            has_bias: true,
            norm: Norm::None,
            activation: Activation::None,
        },
    ])
    .unwrap();
    let weights = train::init_weights(&spec, 505);
    let mut rng = ChaCha12Rng::seed_from_u64(506);
    let shape = [9, 9, 9];
    let input = Tensor::from_data(
        1,
        shape,
        (0..729).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let mut target = Mask::zeros(Grid::isotropic(shape, 1.0));
    for v in target.data.iter_mut() {
        *v = u8::from(rng.random_range(0.0..1.0f64) < 0.3);
    }

    let (_, grads) = train::backward(&spec, &weights, &input, &target).unwrap();
    let scale = grads.max_abs().max(1e-8);
    let floor = 1e-3 * scale;
    let h = 1e-6f64;
    let mut worst = 0.0f64;
    let mut probe = weights.clone();
    for li in 0..spec.layers.len() {
        let wlen = weights.layers[li].weight.len();
        let blen = weights.layers[li].bias.as_ref().map_or(0, Vec::len);
        for pi in 0..wlen + blen {
            let read = |s: &WeightStore| {
                if pi < wlen {
                    s.layers[li].weight[pi]
                } else {
                    s.layers[li].bias.as_ref().unwrap()[pi - wlen]
                }
            };
            let write = |s: &mut WeightStore, v: f32| {
                if pi < wlen {
                    s.layers[li].weight[pi] = v;
                } else {
                    s.layers[li].bias.as_mut().unwrap()[pi - wlen] = v;
                }
            };
            let orig = read(&weights);
            let w_up = (orig as f64 + h) as f32;
            let w_down = (orig as f64 - h) as f32;
            write(&mut probe, w_up);
            let up = train::forward_loss(&spec, &probe, &input, &target).unwrap();
            write(&mut probe, w_down);
            let down = train::forward_loss(&spec, &probe, &input, &target).unwrap();
            write(&mut probe, orig);
            let numeric = (up - down) / (w_up as f64 - w_down as f64);
            let analytic = if pi < wlen {
                grads.layers[li].weight[pi]
            } else {
                grads.layers[li].bias.as_ref().unwrap()[pi - wlen]
            };
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
    println!("PASS 05: gradient check max relative error {worst:.3e} < 1e-4");
}

#[test]
fn acceptance_06_toy_training_reaches_dice() {
    let spec = NetworkSpec::preset("toy").unwrap();
    let cfg = train::TrainConfig::default(); // 500 steps
    let task = train::SphereTask::new([24, 24, 24]);
    let (_, records) = train::train_toy(&spec, &cfg, &task).unwrap();
    assert!(records.len() <= 500);
    let last20: Vec<f64> = records.iter().rev().take(20).map(|r| r.dice).collect();
    let dice = last20.iter().sum::<f64>() / last20.len() as f64;
    assert!(dice > 0.95, "train dice {dice}");

    // determinism per seed, demonstrated at shorter horizon
    let short = train::TrainConfig {
        total_steps: 40,
        cycles: 1,
        ..Default::default()
    };
    let (w1, r1) = train::train_toy(&spec, &short, &task).unwrap();
    let (w2, r2) = train::train_toy(&spec, &short, &task).unwrap();
    assert_eq!(w1, w2);
    assert_eq!(r1, r2);
    println!("PASS 06: toy training dice {dice:.4} > 0.95 within 500 steps, deterministic");
}

#[test]
fn acceptance_07_metrics_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(707);
    let mut random_mask = |shape: [usize; 3]| {
        let mut m = Mask::zeros(Grid::isotropic(shape, 1.0));
        // a random box plus voxel noise
        let lo = [
            rng.random_range(0..shape[0] / 2),
            rng.random_range(0..shape[1] / 2),
            rng.random_range(0..shape[2] / 2),
        ];
        let hi = [
            rng.random_range(lo[0] + 1..=shape[0]),
            rng.random_range(lo[1] + 1..=shape[1]),
            rng.random_range(lo[2] + 1..=shape[2]),
        ];
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    let idx = m.grid.index(x, y, z);
                    m.data[idx] = 1;
                }
            }
        }
        for v in m.data.iter_mut() {
            if rng.random_range(0..25) == 0 {
                *v ^= 1;
            }
        }
        m
    };

    let mut msd_cases = 0;
    for case in 0..100 {
        let shape = [16, 16, 16];
        let pred = random_mask(shape);
        let gt = random_mask(shape);

        // counting oracle
        let (mut tp, mut fp, mut fne, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..pred.data.len() {
            match (pred.data[i] != 0, gt.data[i] != 0) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fne += 1,
                (false, false) => tn += 1,
            }
        }
        let c = metrics::confusion(&pred, &gt).unwrap();
        assert_eq!(
            (c.true_pos, c.false_pos, c.false_neg, c.true_neg),
            (tp, fp, fne, tn),
            "case {case}"
        );
        let dice_oracle = if 2 * tp + fp + fne == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fne) as f64
        };
        assert_eq!(metrics::dice(&pred, &gt).unwrap(), dice_oracle);
        let prec_oracle = if tp + fp == 0 {
            if fne == 0 { 1.0 } else { 0.0 }
        } else {
            tp as f64 / (tp + fp) as f64
        };
        assert_eq!(metrics::precision(&pred, &gt).unwrap(), prec_oracle);
        let rec_oracle = if tp + fne == 0 {
            if fp == 0 { 1.0 } else { 0.0 }
        } else {
            tp as f64 / (tp + fne) as f64
        };
        assert_eq!(metrics::recall(&pred, &gt).unwrap(), rec_oracle);

        // all-pairs surface oracle
        let surface = |m: &Mask| -> Vec<[i64; 3]> {
            let [nx, ny, nz] = m.grid.shape;
            let at = |x: i64, y: i64, z: i64| -> bool {
                x >= 0
                    && y >= 0
                    && z >= 0
                    && (x as usize) < nx
                    && (y as usize) < ny
                    && (z as usize) < nz
                    && m.data[m.grid.index(x as usize, y as usize, z as usize)] != 0
            };
            let mut out = Vec::new();
            for z in 0..nz as i64 {
                for y in 0..ny as i64 {
                    for x in 0..nx as i64 {
                        if at(x, y, z)
                            && (!at(x - 1, y, z)
                                || !at(x + 1, y, z)
                                || !at(x, y - 1, z)
                                || !at(x, y + 1, z)
                                || !at(x, y, z - 1)
                                || !at(x, y, z + 1))
                        {
                            out.push([x, y, z]);
                        }
                    }
                }
            }
            out
        };
        let ps = surface(&pred);
        let gs = surface(&gt);
        if ps.is_empty() || gs.is_empty() {
            assert!(metrics::mean_surface_distance(&pred, &gt).is_err());
            continue;
        }
        msd_cases += 1;
        let directed = |from: &[[i64; 3]], to: &[[i64; 3]]| -> f64 {
            from.iter()
                .map(|a| {
                    to.iter()
                        .map(|b| {
                            (((a[0] - b[0]).pow(2) + (a[1] - b[1]).pow(2) + (a[2] - b[2]).pow(2))
                                as f64)
                                .sqrt()
                        })
                        .fold(f64::MAX, f64::min)
                })
                .sum::<f64>()
                / from.len() as f64
        };
        let oracle = 0.5 * (directed(&ps, &gs) + directed(&gs, &ps));
        let got = metrics::mean_surface_distance(&pred, &gt).unwrap();
        assert!(
            (got - oracle).abs() < 1e-6,
            "case {case}: msd {got} vs oracle {oracle}"
        );
    }
    assert!(msd_cases >= 90);
    println!("PASS 07: metrics match brute-force oracles on 100 random 16^3 pairs ({msd_cases} with surfaces)");
}

#[test]
fn acceptance_08_memory_contract_mindgrab_64() {
    let spec = NetworkSpec::mindgrab();
    let store = WeightStore::zeroed(&spec);
    let shape = [64, 64, 64];
    let n: usize = shape.iter().product();
    let input = Tensor::from_data(1, shape, (0..n).map(|i| (i as f32 * 0.017).sin()).collect())
        .unwrap();
    let out = forward(&spec, &store, &input).unwrap();
    let bound = 2 * 15 * n * 4;
    assert_eq!(out.stats.buffers_allocated, 2);
    assert!(
        out.stats.peak_bytes <= bound,
        "peak {} > bound {bound}",
        out.stats.peak_bytes
    );
    assert_eq!(out.logits.shape(), shape);
    println!(
        "PASS 08: peak activation {} bytes <= 2*15*64^3*4 = {bound}",
        out.stats.peak_bytes
    );
}

#[test]
fn acceptance_09_crop_path_efficiency() {
    // 256^3 input whose bright 164^3 cube plus the 8-voxel margin makes a
    // 180^3 crop box; a compact 15-channel head keeps the run short while
    // exercising the same buffer arithmetic as the full network.
    let dir = tempfile::tempdir().unwrap();
    let spec = NetworkSpec::new(vec![
        ConvLayerSpec {
            in_channels: 1,
            out_channels: 15,
            kernel_size: 3,
            dilation: 1,
            has_bias: false,
            norm: Norm::ParamFreeLayerNorm,
            activation: Activation::Relu,
        },
        ConvLayerSpec {
            in_channels: 15,
            out_channels: 2,
            kernel_size: 1,
            dilation: 1,
            has_bias: true,
            norm: Norm::None,
            activation: Activation::None,
        },
    ])
    .unwrap();
    let weights_path = dir.path().join("model.json");
    save_weight_files(&spec, &WeightStore::zeroed(&spec), &weights_path).unwrap();

    let mut volume = Volume::zeros(Grid::isotropic([256, 256, 256], 1.0));
    for z in 46..210 {
        for y in 46..210 {
            let row = (z * 256 + y) * 256 + 46;
            volume.data[row..row + 164].fill(1000.0);
        }
    }
    let input = dir.path().join("cube.nii");
    write_nifti_volume(&volume, &input).unwrap();

    let opts = mindgrab::bench::BenchOptions {
        weights: weights_path,
        crop: false,
        compare_crop: true,
        crop_threshold: 0.05,
        crop_margin: 8,
        nonzero_percentiles: false,
    };
    let records = mindgrab::bench::bench(&[input], &opts).unwrap();
    assert_eq!(records.len(), 2);
    let full = records.iter().find(|r| r.mode == "full").unwrap();
    let crop = records.iter().find(|r| r.mode == "crop").unwrap();
    assert!(crop.peak_activation_bytes < full.peak_activation_bytes);

    let ratio = crop.peak_activation_bytes as f64 / full.peak_activation_bytes as f64;
    let expect = (180.0f64 / 256.0).powi(3);
    assert!(
        (ratio - expect).abs() / expect < 0.10,
        "ratio {ratio} vs (180/256)^3 = {expect}"
    );
    println!(
        "PASS 09: cropped/full peak activation ratio {ratio:.5} within 10% of (180/256)^3 = {expect:.5}"
    );
}

fn random_oriented_volume(rng: &mut ChaCha12Rng) -> Volume {
    let shape = [
        rng.random_range(36..72usize),
        rng.random_range(36..72usize),
        rng.random_range(36..72usize),
    ];
    // keep every axis's field of view >= ~90 mm so the conformed grid is
    // not almost-all background
    let spacing = [
        rng.random_range((90.0 / shape[0] as f64).max(1.5)..3.5),
        rng.random_range((90.0 / shape[1] as f64).max(1.5)..3.5),
        rng.random_range((90.0 / shape[2] as f64).max(1.5)..3.5),
    ];
    let angle = rng.random_range(-0.5..0.5f64);
    let (s, c) = angle.sin_cos();
    let flip = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
    let t = [
        rng.random_range(-50.0..50.0f64),
        rng.random_range(-50.0..50.0f64),
        rng.random_range(-50.0..50.0f64),
    ];
    let f32ify = |row: [f64; 4]| row.map(|v| v as f32 as f64);
    let affine = Affine::from_spatial_rows(
        f32ify([c * spacing[0] * flip, -s * spacing[1], 0.0, t[0]]),
        f32ify([s * spacing[0] * flip, c * spacing[1], 0.0, t[1]]),
        f32ify([0.0, 0.0, spacing[2], t[2]]),
    );
    let grid = Grid::new(shape, affine.column_norms(), affine);
    let mut v = Volume::zeros(grid);
    let center = [
        shape[0] as f64 / 2.0,
        shape[1] as f64 / 2.0,
        shape[2] as f64 / 2.0,
    ];
    let radii = [
        shape[0] as f64 * 0.35,
        shape[1] as f64 * 0.3,
        shape[2] as f64 * 0.35,
    ];
    for z in 0..shape[2] {
        for y in 0..shape[1] {
            for x in 0..shape[0] {
                let d = ((x as f64 - center[0]) / radii[0]).powi(2)
                    + ((y as f64 - center[1]) / radii[1]).powi(2)
                    + ((z as f64 - center[2]) / radii[2]).powi(2);
                let idx = v.grid.index(x, y, z);
                let base = if d <= 1.0 { 100.0 } else { 1.0 };
                v.data[idx] = base + rng.random_range(-0.4..0.4f32);
            }
        }
    }
    v
}

#[test]
fn acceptance_10_native_space_guarantee() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, store) = {
        let spec = NetworkSpec::new(vec![ConvLayerSpec {
            in_channels: 1,
            out_channels: 2,
            kernel_size: 1,
            dilation: 1,
            has_bias: true,
            norm: Norm::None,
            activation: Activation::None,
        }])
        .unwrap();
        let mut store = WeightStore::zeroed(&spec);
        store.layers[0].weight = vec![-1.0, 1.0];
        store.layers[0].bias = Some(vec![0.5, -0.5]);
        (spec, store)
    };
    let weights_path = dir.path().join("model.json");
    save_weight_files(&spec, &store, &weights_path).unwrap();

    let mut rng = ChaCha12Rng::seed_from_u64(1010);
    for case in 0..20 {
        let volume = random_oriented_volume(&mut rng);
        let input = dir.path().join(format!("in{case}.nii"));
        write_nifti_volume(&volume, &input).unwrap();
        let input_img = read_nifti(&input).unwrap();

        for crop in [false, true] {
            let out = dir.path().join(format!("out{case}-{crop}.nii"));
            let mut req = mindgrab::pipeline::StripRequest::new(
                input.clone(),
                out.clone(),
                weights_path.clone(),
            );
            req.mask_only = true;
            req.crop = crop;
            mindgrab::pipeline::strip(&req).unwrap();

            let out_img = read_nifti(&out).unwrap();
            assert_eq!(out_img.header.dims, input_img.header.dims, "case {case} crop {crop}");
            assert_eq!(
                out_img.header.srow, input_img.header.srow,
                "case {case} crop {crop}: affine bits differ"
            );
        }
    }
    println!("PASS 10: 20 random volumes keep native shape and affine bit-for-bit on both paths");
}

#[test]
fn acceptance_11_nifti_roundtrip() {
    let mut rng = ChaCha12Rng::seed_from_u64(1111);
    for case in 0..50 {
        let shape = [
            rng.random_range(1..20usize),
            rng.random_range(1..20usize),
            rng.random_range(1..20usize),
        ];
        let angle = rng.random_range(-0.8..0.8f64);
        let (s, c) = angle.sin_cos();
        let sp = [
            rng.random_range(0.3..4.0f64),
            rng.random_range(0.3..4.0f64),
            rng.random_range(0.3..4.0f64),
        ];
        let t = [
            rng.random_range(-120.0..120.0f64),
            rng.random_range(-120.0..120.0f64),
            rng.random_range(-120.0..120.0f64),
        ];
        let f32ify = |row: [f64; 4]| row.map(|v| v as f32 as f64);
        let affine = Affine::from_spatial_rows(
            f32ify([c * sp[0], -s * sp[1], 0.0, t[0]]),
            f32ify([s * sp[0], c * sp[1], 0.0, t[1]]),
            f32ify([0.0, 0.0, sp[2], t[2]]),
        );
        let grid = Grid::new(shape, affine.column_norms(), affine);
        let n = grid.voxel_count();
        let volume = Volume::new(
            grid.clone(),
            (0..n).map(|_| rng.random_range(-1e5..1e5f32)).collect(),
        )
        .unwrap();

        let bytes = volume_to_bytes(&volume);
        let img = read_nifti_bytes(&bytes).unwrap();
        assert_eq!(img.voxels, volume.data, "case {case}: data not bit-exact");
        let back = img.to_volume().unwrap();
        assert!(
            back.grid.affine.max_abs_diff(&grid.affine) < 1e-5,
            "case {case}: affine drift"
        );
        assert_eq!(back.grid.shape, shape);
    }
    println!("PASS 11: 50 randomized fixtures survive write -> read bit-exactly");
}
