//! File formats: depth images (16-bit PNG, PFM), intrinsics text files,
//! sample manifests and metric reports.

mod intrinsics;
mod manifest;
mod pfm;
mod png16;
pub mod report;

use std::path::Path;

pub use intrinsics::{parse_intrinsics, read_intrinsics, write_intrinsics};
pub use manifest::{ManifestEntry, SampleManifest};
pub use pfm::{read_depth_pfm, write_depth_pfm};
pub use png16::{read_depth_png16, write_depth_png16};
pub use report::{write_report, Aggregate, MetricRecord, Report, ReportFormat, SampleOutcome, StageTimings};

use crate::depth::DepthMap;
use crate::error::{Error, Result};

/// Reads a depth map, choosing the decoder from the file extension
/// (`.png` or `.pfm`, case-insensitive). `png_scale` only applies to PNG.
pub fn read_depth(path: &Path, png_scale: u32) -> Result<DepthMap> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => read_depth_png16(path, png_scale),
        Some("pfm") => read_depth_pfm(path),
        _ => Err(Error::format(
            path,
            "unsupported depth file extension, expected .png or .pfm",
        )),
    }
}
