//! Wall-time and memory benchmarking of the strip pipeline.
//!
//! Timings cover the whole run, from reading the NIfTI input to writing
//! the outputs. The contract-bearing memory figure is the engine's own
//! activation accounting; peak RSS is reported best-effort from
//! `/proc/self/status` and is process-wide (0 when unavailable).

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::CliError;
use crate::pipeline::{strip, StripRequest};

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub weights: PathBuf,
    pub crop: bool,
    /// Run both modes per input and emit a row for each.
    pub compare_crop: bool,
    pub crop_threshold: f32,
    pub crop_margin: usize,
    pub nonzero_percentiles: bool,
}

#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub tag: String,
    pub mode: &'static str,
    pub wall_seconds: f64,
    pub peak_activation_bytes: usize,
    pub weight_bytes: usize,
    pub peak_rss_bytes: u64,
}

/// Process high-water RSS in bytes (`VmHWM`), best-effort. Falls back to
/// the current `VmRSS` on kernels that do not report a high-water mark,
/// and to 0 where `/proc` is unavailable.
pub fn peak_rss_bytes() -> u64 {
    let Ok(status) = std::fs::read_to_string("/proc/self/status") else {
        return 0;
    };
    let field = |name: &str| -> Option<u64> {
        status.lines().find_map(|line| {
            line.strip_prefix(name).map(|rest| {
                rest.trim()
                    .trim_end_matches("kB")
                    .trim()
                    .parse::<u64>()
                    .unwrap_or(0)
                    * 1024
            })
        })
    };
    field("VmHWM:").or_else(|| field("VmRSS:")).unwrap_or(0)
}

fn run_one(input: &Path, opts: &BenchOptions, crop: bool, out_dir: &Path) -> Result<BenchRecord, CliError> {
    let mode: &'static str = if crop { "crop" } else { "full" };
    let mut req = StripRequest::new(
        input.to_path_buf(),
        out_dir.join(format!("bench-{mode}-brain.nii")),
        opts.weights.clone(),
    );
    req.mask_output = Some(out_dir.join(format!("bench-{mode}-mask.nii")));
    req.crop = crop;
    req.crop_threshold = opts.crop_threshold;
    req.crop_margin = opts.crop_margin;
    req.nonzero_percentiles = opts.nonzero_percentiles;

    let start = Instant::now();
    let outcome = strip(&req)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    Ok(BenchRecord {
        tag: input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| input.display().to_string()),
        mode,
        wall_seconds,
        peak_activation_bytes: outcome.stats.peak_bytes,
        weight_bytes: outcome.weight_bytes,
        peak_rss_bytes: peak_rss_bytes(),
    })
}

/// Benchmark each input; runs are serialized to keep timings honest.
pub fn bench(inputs: &[PathBuf], opts: &BenchOptions) -> Result<Vec<BenchRecord>, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("bench needs at least one input".into()));
    }
    let out_dir = std::env::temp_dir().join(format!("mindgrab-bench-{}", std::process::id()));
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.clone(),
        source,
    })?;
    let mut records = Vec::new();
    let result = (|| {
        for input in inputs {
            if opts.compare_crop {
                records.push(run_one(input, opts, false, &out_dir)?);
                records.push(run_one(input, opts, true, &out_dir)?);
            } else {
                records.push(run_one(input, opts, opts.crop, &out_dir)?);
            }
        }
        Ok(())
    })();
    let _ = std::fs::remove_dir_all(&out_dir);
    result.map(|()| records)
}

pub fn bench_csv(records: &[BenchRecord]) -> String {
    let mut out =
        String::from("tag,mode,wall_seconds,peak_activation_bytes,weight_bytes,peak_rss_bytes\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.6},{},{},{}\n",
            r.tag, r.mode, r.wall_seconds, r.peak_activation_bytes, r.weight_bytes, r.peak_rss_bytes
        ));
    }
    out
}
