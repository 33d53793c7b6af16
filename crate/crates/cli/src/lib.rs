//! Skull stripping for volumetric brain scans.
//!
//! This crate is the `std` companion to [`mindgrab_core`]: NIfTI-1 reading
//! and writing (plain and gzipped), the `model.json`/`model.bin` weight
//! format, the end-to-end strip pipeline, benchmarking, and the
//! `mindgrab` command-line tool.

pub mod bench;
pub mod error;
pub mod nifti;
pub mod pipeline;
pub mod report;
pub mod weights;

pub use error::{CliError, ExitCode};
