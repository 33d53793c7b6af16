//! Mask evaluation reports (single pair and batch).

use std::path::{Path, PathBuf};

use mindgrab_core::metrics::{evaluate, MetricReport};
use mindgrab_core::volume::Mask;

use crate::error::CliError;
use crate::nifti;

/// Header comment stating the metric conventions, emitted atop every
/// evaluation CSV.
pub const EVAL_HEADER_COMMENT: &str = "# msd_mm: symmetric mean surface distance \
(average of both directed means), 6-connectivity surfaces, exact euclidean distances, millimeters";

/// Load a NIfTI file as a binary mask (voxels > 0.5 are foreground).
pub fn load_mask(path: &Path) -> Result<Mask, CliError> {
    let wrap = |source| CliError::Nifti {
        path: path.to_path_buf(),
        source,
    };
    let volume = nifti::read_nifti(path).map_err(wrap)?.to_volume().map_err(wrap)?;
    let data = volume.data.iter().map(|&v| u8::from(v > 0.5)).collect();
    Mask::new(volume.grid, data).map_err(CliError::Core)
}

pub struct EvalRow {
    pub file: String,
    pub report: MetricReport,
}

pub fn eval_pair(pred: &Path, gt: &Path) -> Result<EvalRow, CliError> {
    let p = load_mask(pred)?;
    let g = load_mask(gt)?;
    let report = evaluate(&p, &g)?;
    Ok(EvalRow {
        file: pred
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| pred.display().to_string()),
        report,
    })
}

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut out = format!("{EVAL_HEADER_COMMENT}\nfile,dice,precision,recall,msd_mm\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.file, r.report.dice, r.report.precision, r.report.recall, r.report.msd_mm
        ));
    }
    out
}

/// One `group<TAB>pred<TAB>gt` line of a batch list.
#[derive(Debug, Clone)]
pub struct BatchEntry {
    pub group: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

/// Parse a batch TSV; relative paths resolve against the list's directory.
/// Blank lines and `#` comments are skipped.
pub fn parse_batch_list(path: &Path) -> Result<Vec<BatchEntry>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(CliError::Usage(format!(
                "{}:{}: expected 3 tab-separated fields (group, pred, gt), got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let resolve = |p: &str| {
            let pb = PathBuf::from(p);
            if pb.is_absolute() {
                pb
            } else {
                base.join(pb)
            }
        };
        entries.push(BatchEntry {
            group: fields[0].to_string(),
            pred: resolve(fields[1]),
            gt: resolve(fields[2]),
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone)]
pub struct GroupSummary {
    pub group: String,
    pub n: usize,
    /// (mean, sample standard deviation) per metric.
    pub dice: (f64, f64),
    pub precision: (f64, f64),
    pub recall: (f64, f64),
    pub msd_mm: (f64, f64),
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Evaluate every pair and aggregate mean ± SD per group, preserving the
/// order groups first appear in.
pub fn eval_batch(entries: &[BatchEntry]) -> Result<Vec<GroupSummary>, CliError> {
    let mut order: Vec<String> = Vec::new();
    let mut per_group: std::collections::HashMap<String, Vec<MetricReport>> =
        std::collections::HashMap::new();
    for e in entries {
        let row = eval_pair(&e.pred, &e.gt)?;
        if !per_group.contains_key(&e.group) {
            order.push(e.group.clone());
        }
        per_group.entry(e.group.clone()).or_default().push(row.report);
    }
    Ok(order
        .into_iter()
        .map(|group| {
            let reports = &per_group[&group];
            let col = |f: fn(&MetricReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
            GroupSummary {
                group: group.clone(),
                n: reports.len(),
                dice: mean_sd(&col(|r| r.dice)),
                precision: mean_sd(&col(|r| r.precision)),
                recall: mean_sd(&col(|r| r.recall)),
                msd_mm: mean_sd(&col(|r| r.msd_mm)),
            }
        })
        .collect())
}

pub fn batch_csv(groups: &[GroupSummary]) -> String {
    let mut out = format!(
        "{EVAL_HEADER_COMMENT}\ngroup,n,dice_mean,dice_sd,precision_mean,precision_sd,recall_mean,recall_sd,msd_mm_mean,msd_mm_sd\n"
    );
    for g in groups {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            g.group,
            g.n,
            g.dice.0,
            g.dice.1,
            g.precision.0,
            g.precision.1,
            g.recall.0,
            g.recall.1,
            g.msd_mm.0,
            g.msd_mm.1
        ));
    }
    out
}
