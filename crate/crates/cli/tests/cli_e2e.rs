//! End-to-end runs of the compiled `mindgrab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mindgrab::nifti::{read_nifti, write_nifti_mask, write_nifti_volume};
use mindgrab::weights::save_weight_files;
use mindgrab_core::geom::Grid;
use mindgrab_core::net::{Activation, ConvLayerSpec, NetworkSpec, Norm, WeightStore};
use mindgrab_core::volume::{Mask, Volume};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mindgrab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Pointwise logits [0.5 − v, v − 0.5]: brain wherever intensity > 0.5.
fn write_threshold_weights(dir: &Path) -> PathBuf {
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
    let path = dir.join("model.json");
    save_weight_files(&spec, &store, &path).unwrap();
    path
}

fn sphere_volume(shape: [usize; 3], spacing: f64, radius_mm: f64) -> (Volume, Mask) {
    let grid = Grid::isotropic(shape, spacing);
    let mut v = Volume::zeros(grid.clone());
    let mut m = Mask::zeros(grid);
    let c = [
        (shape[0] as f64 - 1.0) / 2.0 * spacing,
        (shape[1] as f64 - 1.0) / 2.0 * spacing,
        (shape[2] as f64 - 1.0) / 2.0 * spacing,
    ];
    for z in 0..shape[2] {
        for y in 0..shape[1] {
            for x in 0..shape[0] {
                let w = [x as f64 * spacing, y as f64 * spacing, z as f64 * spacing];
                let r2 = (w[0] - c[0]).powi(2) + (w[1] - c[1]).powi(2) + (w[2] - c[2]).powi(2);
                let idx = v.grid.index(x, y, z);
                if r2 <= radius_mm * radius_mm {
                    v.data[idx] = 100.0;
                    m.data[idx] = 1;
                } else {
                    v.data[idx] = 1.0;
                }
            }
        }
    }
    (v, m)
}

#[test]
fn strip_recovers_a_bright_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let weights = write_threshold_weights(dir.path());
    // 256 mm field of view so the conformed grid is filled, with the
    // sphere bright and big enough to claim the upper percentile window
    let (volume, truth) = sphere_volume([128, 128, 128], 2.0, 50.0);
    let input = dir.path().join("head.nii.gz");
    write_nifti_volume(&volume, &input).unwrap();

    let out_brain = dir.path().join("brain.nii.gz");
    let out_mask = dir.path().join("mask.nii.gz");
    let output = run(&[
        "strip",
        input.to_str().unwrap(),
        "-o",
        out_brain.to_str().unwrap(),
        "--mask",
        out_mask.to_str().unwrap(),
        "-w",
        weights.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    let mask_img = read_nifti(&out_mask).unwrap().to_volume().unwrap();
    let mask = Mask::new(
        mask_img.grid.clone(),
        mask_img.data.iter().map(|&v| u8::from(v > 0.5)).collect(),
    )
    .unwrap();
    assert_eq!(mask.grid.shape, truth.grid.shape);
    let dice = mindgrab_core::metrics::dice(&mask, &truth).unwrap();
    assert!(dice > 0.95, "dice {dice}");

    // the brain image is the input under the mask
    let brain = read_nifti(&out_brain).unwrap().to_volume().unwrap();
    for i in 0..brain.data.len() {
        let expect = if mask.data[i] != 0 { volume.data[i] } else { 0.0 };
        assert_eq!(brain.data[i], expect, "voxel {i}");
    }
}

#[test]
fn cropped_and_default_runs_share_native_shape_and_affine() {
    let dir = tempfile::tempdir().unwrap();
    let weights = write_threshold_weights(dir.path());
    let (volume, _) = sphere_volume([100, 96, 104], 2.5, 60.0);
    let input = dir.path().join("in.nii");
    write_nifti_volume(&volume, &input).unwrap();

    let mut outputs = Vec::new();
    for (flag, name) in [(false, "full"), (true, "crop")] {
        let out = dir.path().join(format!("{name}.nii"));
        let mut args = vec![
            "strip",
            input.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
            "-w",
            weights.to_str().unwrap(),
            "--mask-only",
        ];
        if flag {
            args.push("--crop");
        }
        let output = run(&args);
        assert!(output.status.success(), "{output:?}");
        outputs.push(read_nifti(&out).unwrap());
    }
    let input_img = read_nifti(&input).unwrap();
    for img in &outputs {
        assert_eq!(img.header.dims, input_img.header.dims);
        assert_eq!(img.header.srow, input_img.header.srow);
    }
}

#[test]
fn strip_missing_weights_exits_4_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let (volume, _) = sphere_volume([16, 16, 16], 2.0, 10.0);
    let input = dir.path().join("in.nii");
    write_nifti_volume(&volume, &input).unwrap();
    let output = run(&[
        "strip",
        input.to_str().unwrap(),
        "-o",
        dir.path().join("out.nii").to_str().unwrap(),
        "-w",
        dir.path().join("missing-model.json").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("missing-model.json"), "{stderr}");
}

#[test]
fn analyze_preset_emits_four_rows_and_flags_the_incdec_note() {
    let output = run(&["analyze", "--preset", "mindgrab"]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 5, "{stdout}");
    assert!(lines[0].starts_with("name,"));
    assert!(stdout.contains("5543203"));
    assert!(stdout.contains("2256163"));
    assert!(stdout.contains("5951971355039011"));
    assert!(stdout.contains("DIFFERS from nominal 346264"));
}

#[test]
fn analyze_spectrum_matrix_has_one_row_per_dilation() {
    let output = run(&[
        "analyze",
        "--spectrum-taps",
        "0.25,0.5,0.25",
        "--fft-size",
        "64",
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("d=")).collect();
    assert_eq!(rows.len(), 5); // default dilations 1,2,4,8,16
    assert_eq!(rows[0].split_whitespace().count(), 1 + 64);

    // a window shorter than the dilated kernel is a processing error
    let output = run(&[
        "analyze",
        "--spectrum-taps",
        "0.25,0.5,0.25",
        "--fft-size",
        "32",
    ]);
    assert_eq!(output.status.code(), Some(5));
}

#[test]
fn eval_identical_masks_reports_dice_one() {
    let dir = tempfile::tempdir().unwrap();
    let (_, truth) = sphere_volume([20, 20, 20], 1.0, 7.0);
    let a = dir.path().join("a.nii");
    let b = dir.path().join("b.nii");
    write_nifti_mask(&truth, &a).unwrap();
    write_nifti_mask(&truth, &b).unwrap();
    let output = run(&["eval", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.lines().next().unwrap().starts_with("# msd_mm"), "{stdout}");
    assert!(stdout.contains("a.nii,1.000000,1.000000,1.000000,0.000000"), "{stdout}");
}

#[test]
fn eval_batch_aggregates_groups() {
    let dir = tempfile::tempdir().unwrap();
    let (_, truth) = sphere_volume([18, 18, 18], 1.0, 6.0);
    write_nifti_mask(&truth, &dir.path().join("p.nii")).unwrap();
    write_nifti_mask(&truth, &dir.path().join("g.nii")).unwrap();
    let list = dir.path().join("list.tsv");
    std::fs::write(&list, "T1\tp.nii\tg.nii\nT1\tp.nii\tg.nii\n").unwrap();
    let output = run(&["eval", "--batch", list.to_str().unwrap()]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("T1,2,1.000000,0.000000"), "{stdout}");
}

#[test]
fn bench_reports_one_row_per_input() {
    let dir = tempfile::tempdir().unwrap();
    let weights = write_threshold_weights(dir.path());
    let (volume, _) = sphere_volume([128, 128, 128], 2.0, 50.0);
    let input = dir.path().join("in.nii");
    write_nifti_volume(&volume, &input).unwrap();
    let output = run(&[
        "bench",
        input.to_str().unwrap(),
        "-w",
        weights.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.contains("in.nii,full,"));
}

#[test]
fn train_toy_writes_weights_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("toy.json");
    let log = dir.path().join("log.csv");
    let output = run(&[
        "train-toy",
        "--steps",
        "8",
        "--cycles",
        "1",
        "--grid",
        "10",
        "--out",
        model.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    assert!(model.exists() && dir.path().join("toy.bin").exists());
    let log_text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(log_text.lines().count(), 9); // header + 8 steps
    assert!(log_text.starts_with("step,lr,loss,dice"));

    // the trained file round-trips through the inspector
    let output = run(&["weights", "inspect", model.to_str().unwrap()]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("parameters:"), "{stdout}");
    assert!(stdout.contains("sha256:"), "{stdout}");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let output = run(&["frobnicate"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn eval_without_arguments_is_usage_error() {
    let output = run(&["eval"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn corrupt_nifti_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let weights = write_threshold_weights(dir.path());
    let bad = dir.path().join("bad.nii");
    std::fs::write(&bad, b"this is not a nifti file at all........").unwrap();
    let output = run(&[
        "strip",
        bad.to_str().unwrap(),
        "-o",
        dir.path().join("out.nii").to_str().unwrap(),
        "-w",
        weights.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
}
