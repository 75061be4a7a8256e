//! Real-encoder backend for rate-proxy calibration.

use std::path::{Path, PathBuf};
use std::process::Command;

use super::job::{EncodeJob, EncoderKind};
use super::manifest::SequenceSpec;
use super::tools::{run, Toolchain};
use crate::error::{Error, Result};
use crate::rate_proxy::PatchEncoder;
use crate::yuv::YuvPatch;

/// Encodes single-frame patches with the canonical x264 command, writing an
/// elementary H.264 stream so container overhead does not enter the count.
pub struct FfmpegPatchEncoder {
    tools: Toolchain,
    scratch: tempfile::TempDir,
}

impl FfmpegPatchEncoder {
    pub fn new(tools: Toolchain) -> Result<Self> {
        let scratch = tempfile::Builder::new()
            .prefix("rdbench-patch-")
            .tempdir()
            .map_err(|e| Error::io("create patch scratch dir", e))?;
        Ok(FfmpegPatchEncoder { tools, scratch })
    }

    fn job(&self, patch: &YuvPatch, qp: u32, input: &Path) -> EncodeJob {
        let seq = SequenceSpec {
            id: "patch".into(),
            path: input.to_path_buf(),
            geometry: patch.geometry(),
            fps: 25.0,
            frames: 1,
            pix_fmt: "yuv420p".into(),
        };
        EncodeJob::new(&seq, "patch", qp, EncoderKind::X264Medium)
    }

    fn unique(&self, ext: &str) -> Result<tempfile::TempPath> {
        tempfile::Builder::new()
            .suffix(ext)
            .tempfile_in(self.scratch.path())
            .map(|f| f.into_temp_path())
            .map_err(|e| Error::io("patch temp file", e))
    }
}

impl PatchEncoder for FfmpegPatchEncoder {
    fn encoded_bytes(&self, patch: &YuvPatch, qp: u32) -> Result<u64> {
        let input = self.unique(".yuv")?;
        std::fs::write(&input, patch.to_bytes()).map_err(|e| Error::io("write patch", e))?;
        let output = self.unique(".264")?;
        let out_path: PathBuf = output.to_path_buf();
        let args = self.job(patch, qp, &input).encode_args(&input, &out_path);
        run(Command::new(&self.tools.ffmpeg).args(&args), "ffmpeg")?;
        let len = std::fs::metadata(&out_path)
            .map_err(|e| Error::io(format!("stat {}", out_path.display()), e))?
            .len();
        Ok(len)
    }
}
