//! Encode jobs and the exact encoder command lines they expand to.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::manifest::SequenceSpec;
use crate::error::{Error, Result};
use crate::types::MetricKind;

/// Encoder configurations of the baseline panel. Every one of them runs
/// single-threaded at constant QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    X264Medium,
    X264TunePsnr,
    X264TuneSsim,
    X264Hqdn3d,
    X264Unsharp,
    X265Medium,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 6] = [
        EncoderKind::X264Medium,
        EncoderKind::X264TunePsnr,
        EncoderKind::X264TuneSsim,
        EncoderKind::X264Hqdn3d,
        EncoderKind::X264Unsharp,
        EncoderKind::X265Medium,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::X264Medium => "x264-medium",
            EncoderKind::X264TunePsnr => "x264-tune-psnr",
            EncoderKind::X264TuneSsim => "x264-tune-ssim",
            EncoderKind::X264Hqdn3d => "x264-hqdn3d",
            EncoderKind::X264Unsharp => "x264-unsharp",
            EncoderKind::X265Medium => "x265-medium",
        }
    }

    fn filter(self) -> Option<&'static str> {
        match self {
            EncoderKind::X264Hqdn3d => Some("hqdn3d"),
            EncoderKind::X264Unsharp => Some("unsharp"),
            _ => None,
        }
    }

    fn tune(self) -> Option<&'static str> {
        match self {
            EncoderKind::X264TunePsnr => Some("psnr"),
            EncoderKind::X264TuneSsim => Some("ssim"),
            _ => None,
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        EncoderKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = EncoderKind::ALL.iter().map(|k| k.name()).collect();
                Error::invalid(format!(
                    "unknown encoder '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// One constant-QP encode of one input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeJob {
    pub sequence: SequenceSpec,
    /// The raw file actually fed to the encoder: the original sequence, or a
    /// preprocessed copy with identical geometry.
    pub input: PathBuf,
    pub variant_id: String,
    pub qp: u32,
    pub encoder: EncoderKind,
    /// Preprocessor command template that produced `input`, if any.
    pub preprocessor: Option<String>,
}

impl EncodeJob {
    pub fn new(
        sequence: &SequenceSpec,
        variant_id: impl Into<String>,
        qp: u32,
        encoder: EncoderKind,
    ) -> Self {
        EncodeJob {
            input: sequence.path.clone(),
            sequence: sequence.clone(),
            variant_id: variant_id.into(),
            qp,
            encoder,
            preprocessor: None,
        }
    }

    /// Arguments after the program name. `-threads 1` is always present.
    pub fn encode_args(&self, input: &Path, output: &Path) -> Vec<String> {
        let g = self.sequence.geometry;
        let mut a: Vec<String> = ["-y", "-f", "rawvideo", "-pix_fmt", "yuv420p", "-s"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        a.push(format!("{}x{}", g.width, g.height));
        a.push("-r".into());
        a.push(format_fps(self.sequence.fps));
        a.push("-i".into());
        a.push(input.display().to_string());
        if let Some(f) = self.encoder.filter() {
            a.push("-vf".into());
            a.push(f.into());
        }
        let codec = match self.encoder {
            EncoderKind::X265Medium => "libx265",
            _ => "libx264",
        };
        a.extend(["-c:v", codec, "-qp"].map(String::from));
        a.push(self.qp.to_string());
        a.extend(["-preset", "medium"].map(String::from));
        if let Some(t) = self.encoder.tune() {
            a.push("-tune".into());
            a.push(t.into());
        }
        a.extend(["-pix_fmt", "yuv420p", "-an", "-threads", "1"].map(String::from));
        if self.encoder == EncoderKind::X265Medium {
            a.push("-x265-params".into());
            a.push("pools=none:frame-threads=1:log-level=error".into());
        }
        a.extend(["-v", "error"].map(String::from));
        a.push(output.display().to_string());
        a
    }

    /// Display form with placeholder paths; stable across machines and used
    /// for cache keys.
    pub fn canonical_command(&self) -> String {
        let args = self.encode_args(Path::new("<yuv>"), Path::new("<out>.mp4"));
        format!("ffmpeg {}", args.join(" "))
    }
}

pub(crate) fn format_fps(fps: f64) -> String {
    if fps.fract() == 0.0 {
        format!("{}", fps as u64)
    } else {
        format!("{fps}")
    }
}

/// An encode with its stream accounting and, once scored, clip-level metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEncode {
    pub job: EncodeJob,
    pub stream_bytes: u64,
    pub bitrate_kbps: f64,
    /// Hex MD5 of the container file.
    pub stream_digest: String,
    pub tool_version: String,
    pub command: String,
    #[serde(default)]
    pub scores: BTreeMap<MetricKind, f64>,
}

/// `8 · bytes · fps / (frames · 1000)`
pub fn bitrate_kbps(stream_bytes: u64, fps: f64, frames: u64) -> f64 {
    8.0 * stream_bytes as f64 * fps / (frames as f64 * 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yuv::Geometry;

    fn seq() -> SequenceSpec {
        SequenceSpec {
            id: "Beauty".into(),
            path: PathBuf::from("/data/Beauty_1920x1080.yuv"),
            geometry: Geometry::new(1920, 1080).unwrap(),
            fps: 120.0,
            frames: 600,
            pix_fmt: "yuv420p".into(),
        }
    }

    #[test]
    fn canonical_command_is_the_published_template() {
        let job = EncodeJob::new(&seq(), "baseline", 22, EncoderKind::X264Medium);
        let args = job.encode_args(Path::new("<yuv>"), Path::new("<out>.mp4"));
        assert_eq!(
            format!("ffmpeg {}", args.join(" ")),
            "ffmpeg -y -f rawvideo -pix_fmt yuv420p -s 1920x1080 -r 120 -i <yuv> \
             -c:v libx264 -qp 22 -preset medium -pix_fmt yuv420p \
             -an -threads 1 -v error <out>.mp4"
        );
        assert_eq!(
            job.canonical_command(),
            format!("ffmpeg {}", args.join(" "))
        );
    }

    #[test]
    fn panel_variants_insert_filter_or_tune() {
        let cmd = |k| EncodeJob::new(&seq(), "v", 27, k).canonical_command();
        assert!(cmd(EncoderKind::X264Unsharp).contains("-i <yuv> -vf unsharp -c:v libx264"));
        assert!(cmd(EncoderKind::X264Hqdn3d).contains("-i <yuv> -vf hqdn3d -c:v libx264"));
        assert!(cmd(EncoderKind::X264TunePsnr).contains("-preset medium -tune psnr -pix_fmt"));
        assert!(cmd(EncoderKind::X264TuneSsim).contains("-preset medium -tune ssim -pix_fmt"));
        let x265 = cmd(EncoderKind::X265Medium);
        assert!(x265.contains("-c:v libx265 -qp 27"));
        for k in EncoderKind::ALL {
            assert!(cmd(k).contains("-threads 1"), "{k}");
        }
    }

    #[test]
    fn fractional_fps_is_kept() {
        let mut s = seq();
        s.fps = 29.97;
        let job = EncodeJob::new(&s, "b", 22, EncoderKind::X264Medium);
        assert!(job.canonical_command().contains("-r 29.97 "));
    }

    #[test]
    fn encoder_names_parse() {
        for k in EncoderKind::ALL {
            assert_eq!(k.name().parse::<EncoderKind>().unwrap(), k);
        }
        assert_eq!(
            "X264_UNSHARP".parse::<EncoderKind>().unwrap(),
            EncoderKind::X264Unsharp
        );
        assert!("nvenc".parse::<EncoderKind>().is_err());
    }

    #[test]
    fn bitrate_formula() {
        // 1 MB over 120 frames at 120 fps -> 8000 kbps
        assert_eq!(bitrate_kbps(1_000_000, 120.0, 120), 8000.0);
    }
}
