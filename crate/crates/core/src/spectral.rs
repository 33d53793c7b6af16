//! Frequency-domain design calculus for dilation schedules.
//!
//! A dilated kernel's Fourier envelope is the ordinary kernel's envelope
//! with the frequency axis compressed modulo the window — higher dilation
//! pushes energy toward high spatial frequencies without adding parameters.
//! Stacked layers multiply their reach: with kernel size `k` and dilations
//! `d₁..d_L`, the receptive field per side is
//! `RF = 1 + (k−1)·[1 + Σᵢ Πⱼ≤ᵢ dⱼ]`, evaluated here in exact big-integer
//! arithmetic because repeated blocks overflow 64-bit intuition quickly
//! (five decreasing blocks already reach ~6·10¹⁵).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::math;
use crate::net::DilationSchedule;

/// Span of one dilated kernel: `r = 1 + (k − 1)·d`.
///
/// `k` must be odd and ≥ 1, `d` ≥ 1.
pub fn effective_kernel_size(k: u64, d: u64) -> u64 {
    debug_assert!(k >= 1 && k % 2 == 1 && d >= 1);
    1 + (k - 1) * d
}

/// Receptive field of a layer stack, exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RFReport {
    pub schedule: DilationSchedule,
    pub kernel_size: u64,
    pub rf: BigUint,
}

/// Evaluate `RF = 1 + (k−1)·[1 + Σᵢ Πⱼ≤ᵢ dⱼ]` over the schedule.
///
/// Larger dilations placed earlier inflate every later cumulative product,
/// so the result is order-sensitive.
pub fn receptive_field(schedule: &DilationSchedule, k: u64) -> RFReport {
    let mut bracket = BigUint::from(1u32);
    let mut cumprod = BigUint::from(1u32);
    for &d in &schedule.dilations {
        cumprod *= BigUint::from(d as u64);
        bracket += &cumprod;
    }
    let rf = BigUint::from(1u32) + BigUint::from(k - 1) * bracket;
    RFReport {
        schedule: schedule.clone(),
        kernel_size: k,
        rf,
    }
}

/// Magnitude profile of a kernel's DFT over an `fft_size` window.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEnvelope {
    pub fft_size: usize,
    /// `|H(m)|` for m in `0..fft_size`; real-symmetric about Nyquist for
    /// real kernels.
    pub magnitudes: Vec<f64>,
}

impl SpectrumEnvelope {
    /// Separable 2D envelope (outer product of the 1D profile), row-major
    /// `fft_size × fft_size`.
    pub fn grid2d(&self) -> Vec<f64> {
        let n = self.fft_size;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.magnitudes[i] * self.magnitudes[j];
            }
        }
        out
    }
}

/// DFT magnitude envelope of `taps` dilated by `d`, embedded in a length-`n`
/// window (zeros inserted between taps).
pub fn kernel_spectrum(taps: &[f64], d: usize, n: usize) -> Result<SpectrumEnvelope> {
    if taps.is_empty() {
        return Err(Error::InvalidSpec("empty kernel".to_string()));
    }
    let span = 1 + (taps.len() - 1) * d;
    if span > n {
        return Err(Error::KernelLargerThanWindow {
            kernel: span,
            window: n,
        });
    }
    let mut magnitudes = Vec::with_capacity(n);
    for m in 0..n {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (j, &t) in taps.iter().enumerate() {
            // tap j sits at index j·d of the window
            let phase = -2.0 * core::f64::consts::PI * (j * d % n) as f64 * m as f64 / n as f64;
            re += t * math::cos(phase);
            im += t * math::sin(phase);
        }
        magnitudes.push(math::sqrt(re * re + im * im));
    }
    Ok(SpectrumEnvelope {
        fft_size: n,
        magnitudes,
    })
}

/// A schedule with a human name and, for the shipped configurations, the
/// receptive-field figure it is usually quoted at.
#[derive(Debug, Clone)]
pub struct NamedSchedule {
    pub name: String,
    pub glyph: String,
    pub schedule: DilationSchedule,
    /// Exact quoted value to cross-check against; a mismatch is flagged in
    /// the report rather than papered over.
    pub nominal_rf: Option<u64>,
    /// Rounded shorthand the value is usually quoted as (e.g. "5.5M").
    pub quoted: Option<String>,
}

impl NamedSchedule {
    pub fn new(name: &str, schedule: DilationSchedule) -> Self {
        let glyph = schedule.glyph();
        NamedSchedule {
            name: name.to_string(),
            glyph,
            schedule,
            nominal_rf: None,
            quoted: None,
        }
    }
}

/// The four block configurations the architecture study quotes receptive
/// fields for.
///
/// `incdec` uses the nine-layer reading (1-2-4-8-16-8-4-2-1, the shared
/// peak counted once): that is the only interpretation that lands within
/// ±2 of the quoted 346,264. The exact formula value still differs by 1,
/// which the report flags instead of hard-coding the quoted number.
pub fn discussion_schedules() -> Vec<NamedSchedule> {
    let mk = |name: &str,
              glyph: &str,
              dil: Vec<usize>,
              nominal: Option<u64>,
              quoted: &str| NamedSchedule {
        name: name.to_string(),
        glyph: glyph.to_string(),
        schedule: DilationSchedule::new(dil).expect("static schedule"),
        nominal_rf: nominal,
        quoted: Some(quoted.to_string()),
    };
    vec![
        mk(
            "incdec",
            "\u{25C0}\u{25B6}",
            vec![1, 2, 4, 8, 16, 8, 4, 2, 1],
            Some(346_264),
            "346264",
        ),
        mk(
            "decinc",
            "\u{25B6}\u{25C0}",
            vec![16, 8, 4, 2, 1, 1, 2, 4, 8, 16],
            None,
            "2.3M",
        ),
        mk(
            "decdec",
            "\u{25B6}\u{25B6}",
            vec![16, 8, 4, 2, 1, 16, 8, 4, 2, 1],
            None,
            "5.5M",
        ),
        mk(
            "mindgrab",
            "\u{25B6}\u{25B6}\u{25B6}\u{25B6}\u{25B6}",
            [[16usize, 8, 4, 2, 1]; 5].concat(),
            None,
            "6e15",
        ),
    ]
}

/// The classic context-aggregation schedule (1-1-2-4-8-16-1-1) whose
/// receptive field already exceeds 4000 per side at depth eight.
pub fn context_aggregation_schedule() -> NamedSchedule {
    NamedSchedule::new(
        "context-agg",
        DilationSchedule::new(vec![1, 1, 2, 4, 8, 16, 1, 1]).expect("static schedule"),
    )
}

/// One row of the schedule report.
#[derive(Debug, Clone)]
pub struct ScheduleRow {
    pub name: String,
    pub glyph: String,
    pub kernel_size: u64,
    pub dilations: Vec<usize>,
    pub rf: BigUint,
    pub effective_kernels: Vec<u64>,
    pub nominal_rf: Option<u64>,
    pub quoted: Option<String>,
    pub note: String,
}

/// Evaluate every schedule at kernel size `k`.
pub fn schedule_report(schedules: &[NamedSchedule], k: u64) -> Vec<ScheduleRow> {
    schedules
        .iter()
        .map(|ns| {
            let report = receptive_field(&ns.schedule, k);
            let effective_kernels = ns
                .schedule
                .dilations
                .iter()
                .map(|&d| effective_kernel_size(k, d as u64))
                .collect();
            let note = match ns.nominal_rf {
                Some(nominal) => {
                    let nominal_big = BigUint::from(nominal);
                    if report.rf == nominal_big {
                        "matches nominal".to_string()
                    } else {
                        let (delta, sign) = if report.rf > nominal_big {
                            (&report.rf - &nominal_big, "+")
                        } else {
                            (&nominal_big - &report.rf, "-")
                        };
                        format!("DIFFERS from nominal {nominal} by {sign}{delta}")
                    }
                }
                None => String::new(),
            };
            ScheduleRow {
                name: ns.name.clone(),
                glyph: ns.glyph.clone(),
                kernel_size: k,
                dilations: ns.schedule.dilations.clone(),
                rf: report.rf,
                effective_kernels,
                nominal_rf: ns.nominal_rf,
                quoted: ns.quoted.clone(),
                note,
            }
        })
        .collect()
}

/// Render rows as CSV (header always present).
pub fn schedule_csv(rows: &[ScheduleRow]) -> String {
    let mut out = String::from(
        "name,glyph,kernel,dilations,receptive_field,quoted,effective_kernels,note\n",
    );
    for r in rows {
        let dil: Vec<String> = r.dilations.iter().map(|d| d.to_string()).collect();
        let eff: Vec<String> = r.effective_kernels.iter().map(|e| e.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.name,
            r.glyph,
            r.kernel_size,
            dil.join("-"),
            r.rf,
            r.quoted.clone().unwrap_or_default(),
            eff.join("-"),
            r.note
        ));
    }
    out
}
