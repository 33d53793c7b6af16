//! The end-to-end strip pipeline.
//!
//! read → conform → normalize → [crop] → forward → argmax → [embed] →
//! map to native space → write. Whatever happens in the middle, outputs
//! are on the input's native grid with the input's affine.

use std::path::{Path, PathBuf};

use mindgrab_core::engine::{argmax_mask, forward, ActivationStats};
use mindgrab_core::net::{NetworkSpec, WeightStore};
use mindgrab_core::tensor::Tensor;
use mindgrab_core::volume::{
    apply_mask, compute_crop_bbox, conform, crop, embed, mask_to_native, normalize_percentile,
    BBox, Mask, NormalizationSpec, Volume, DEFAULT_CROP_MARGIN, DEFAULT_CROP_THRESHOLD,
};

use crate::error::CliError;
use crate::nifti;
use crate::weights;

/// One strip invocation.
#[derive(Debug, Clone)]
pub struct StripRequest {
    pub input: PathBuf,
    /// Receives the brain-extracted image, or the mask with `mask_only`.
    pub output: PathBuf,
    /// Optional extra mask output alongside the brain image.
    pub mask_output: Option<PathBuf>,
    pub weights: PathBuf,
    pub mask_only: bool,
    pub crop: bool,
    pub crop_threshold: f32,
    pub crop_margin: usize,
    pub nonzero_percentiles: bool,
}

impl StripRequest {
    pub fn new(input: PathBuf, output: PathBuf, weights: PathBuf) -> Self {
        StripRequest {
            input,
            output,
            mask_output: None,
            weights,
            mask_only: false,
            crop: false,
            crop_threshold: DEFAULT_CROP_THRESHOLD,
            crop_margin: DEFAULT_CROP_MARGIN,
            nonzero_percentiles: false,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.crop_threshold > 0.0 && self.crop_threshold < 1.0) {
            return Err(CliError::Usage(format!(
                "--crop-threshold must be in (0, 1), got {}",
                self.crop_threshold
            )));
        }
        let mut paths = vec![&self.input, &self.output, &self.weights];
        if let Some(m) = &self.mask_output {
            paths.push(m);
        }
        for (i, a) in paths.iter().enumerate() {
            for b in paths.iter().skip(i + 1) {
                if a == b {
                    return Err(CliError::Usage(format!(
                        "paths must be distinct: {}",
                        a.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What a strip run produced, for benchmarking and tests.
#[derive(Debug)]
pub struct StripOutcome {
    /// Mask on the input's native grid (also written to disk).
    pub mask: Mask,
    pub stats: ActivationStats,
    pub crop_bbox: Option<BBox>,
    pub weight_bytes: usize,
}

/// In-memory core of the pipeline: native volume in, native mask out.
pub fn strip_volume(
    native: &Volume,
    spec: &NetworkSpec,
    store: &WeightStore,
    crop_flag: bool,
    crop_threshold: f32,
    crop_margin: usize,
    nonzero_percentiles: bool,
) -> Result<(Mask, ActivationStats, Option<BBox>), CliError> {
    let (conformed, transform) = conform(native)?;
    let norm_spec = NormalizationSpec {
        nonzero_only: nonzero_percentiles,
        ..Default::default()
    };
    let normalized = normalize_percentile(&conformed, &norm_spec)?;

    let (conf_mask, stats, bbox) = if crop_flag {
        let bbox = compute_crop_bbox(&normalized, crop_threshold, crop_margin)?;
        let cropped = crop(&normalized, &bbox)?;
        let shape = cropped.grid.shape;
        let grid = cropped.grid.clone();
        let tensor = Tensor::from_data(1, shape, cropped.data)?;
        let out = forward(spec, store, &tensor)?;
        let small = argmax_mask(&out.logits, &grid)?;
        (embed(&small, &bbox, &transform.conformed)?, out.stats, Some(bbox))
    } else {
        let shape = normalized.grid.shape;
        let grid = normalized.grid.clone();
        let tensor = Tensor::from_data(1, shape, normalized.data)?;
        let out = forward(spec, store, &tensor)?;
        (argmax_mask(&out.logits, &grid)?, out.stats, None)
    };

    let native_mask = mask_to_native(&conf_mask, &transform)?;
    Ok((native_mask, stats, bbox))
}

/// Full file-to-file pipeline.
pub fn strip(req: &StripRequest) -> Result<StripOutcome, CliError> {
    req.validate()?;

    let (_, spec, store) =
        weights::load_weight_files(&req.weights).map_err(|source| CliError::Weights {
            path: req.weights.clone(),
            source,
        })?;
    let raw = nifti::read_nifti(&req.input).map_err(|source| CliError::Nifti {
        path: req.input.clone(),
        source,
    })?;
    let native = raw.to_volume().map_err(|source| CliError::Nifti {
        path: req.input.clone(),
        source,
    })?;

    let (mask, stats, crop_bbox) = strip_volume(
        &native,
        &spec,
        &store,
        req.crop,
        req.crop_threshold,
        req.crop_margin,
        req.nonzero_percentiles,
    )?;

    let write_mask = |path: &Path| -> Result<(), CliError> {
        nifti::write_nifti_mask(&mask, path).map_err(|source| CliError::Nifti {
            path: path.to_path_buf(),
            source,
        })
    };

    if req.mask_only {
        write_mask(&req.output)?;
    } else {
        let brain = apply_mask(&native, &mask)?;
        nifti::write_nifti_volume(&brain, &req.output).map_err(|source| CliError::Nifti {
            path: req.output.clone(),
            source,
        })?;
        if let Some(mask_path) = &req.mask_output {
            write_mask(mask_path)?;
        }
    }

    Ok(StripOutcome {
        mask,
        stats,
        crop_bbox,
        weight_bytes: store.total_scalars() * 4,
    })
}
