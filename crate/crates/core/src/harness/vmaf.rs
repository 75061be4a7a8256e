//! libvmaf invocation and log parsing.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::stats::mean;
use crate::types::MetricKind;

/// Filter graph for one pass producing all four metrics. `{log}` is replaced
/// with the log file name; first input is the distorted clip, second the
/// reference.
pub const VMAF_FILTER_TEMPLATE: &str = "[0:v][1:v]libvmaf=\
model='version=vmaf_v0.6.1\\:name=vmaf|version=vmaf_v0.6.1neg\\:name=vmaf_neg':\
feature='name=psnr|name=float_ms_ssim':\
log_fmt=json:log_path={log}:n_threads=1";

/// How frame scores are pooled into a clip score.
pub const POOLING: &str = "arithmetic mean over frames";

pub fn vmaf_filter(log_name: &str) -> String {
    VMAF_FILTER_TEMPLATE.replace("{log}", log_name)
}

/// Key of each metric in the per-frame log.
pub fn log_key(metric: MetricKind) -> &'static str {
    match metric {
        MetricKind::Vmaf => "vmaf",
        MetricKind::VmafNeg => "vmaf_neg",
        MetricKind::PsnrY => "psnr_y",
        MetricKind::MsSsim => "float_ms_ssim",
    }
}

#[derive(Deserialize)]
struct Log {
    frames: Vec<Frame>,
}

#[derive(Deserialize)]
struct Frame {
    metrics: BTreeMap<String, f64>,
}

/// Clip-level scores from a libvmaf JSON log: the frame mean of each metric.
pub fn parse_log(json: &str, expected_frames: u64) -> Result<BTreeMap<MetricKind, f64>> {
    let log: Log = serde_json::from_str(json).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: format!("libvmaf log: {e}"),
    })?;
    if log.frames.len() as u64 != expected_frames {
        return Err(Error::invalid(format!(
            "libvmaf scored {} frames, expected {expected_frames}",
            log.frames.len()
        )));
    }
    let mut out = BTreeMap::new();
    for m in MetricKind::ALL {
        let key = log_key(m);
        let values = log
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.metrics.get(key).copied().ok_or_else(|| {
                    Error::invalid({
                        let hint = if key == "float_ms_ssim" {
                            " (MS-SSIM needs frames of at least 176x176)"
                        } else {
                            ""
                        };
                        format!("libvmaf log frame {i} lacks '{key}'{hint}")
                    })
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.insert(m, mean(&values)?);
    }
    Ok(out)
}

pub fn read_log(path: &Path, expected_frames: u64) -> Result<BTreeMap<MetricKind, f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    parse_log(&text, expected_frames)
}
