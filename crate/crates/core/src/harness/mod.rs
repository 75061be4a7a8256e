//! Deterministic encode and score orchestration over external tools.
//!
//! Every encode runs single-threaded with a fixed command line, so a job's
//! stream is a pure function of its input bytes, command and tool version.
//! That triple is the cache key.

pub mod cache;
pub mod job;
pub mod manifest;
pub mod patch;
pub mod preprocess;
pub mod tools;
pub mod vmaf;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cache::{cache_key, Cache};
pub use job::{bitrate_kbps, EncodeJob, EncoderKind, ScoredEncode};
pub use manifest::{read_manifest, SequenceSpec};
pub use patch::FfmpegPatchEncoder;
pub use tools::Toolchain;

use crate::error::{Error, Result};
use crate::pool::parallel_map;
use crate::types::{RDCurve, RDPoint, CANONICAL_QPS};
use cache::{combine, md5_file, DigestMemo};
use job::format_fps;
use tools::run;

/// Variant id of the unmodified reference leg.
pub const BASELINE_ID: &str = "baseline";

/// One leg of a sweep: an encoder configuration plus an optional
/// preprocessor applied to the raw input first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub id: String,
    pub encoder: EncoderKind,
    pub preprocessor: Option<String>,
}

impl VariantSpec {
    pub fn baseline() -> Self {
        VariantSpec {
            id: BASELINE_ID.into(),
            encoder: EncoderKind::X264Medium,
            preprocessor: None,
        }
    }

    pub fn preprocessed(id: impl Into<String>, command: impl Into<String>) -> Self {
        VariantSpec {
            id: id.into(),
            encoder: EncoderKind::X264Medium,
            preprocessor: Some(command.into()),
        }
    }
}

/// Accepts `[id=]<encoder>` or `[id=]pre:<command template>`.
impl FromStr for VariantSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (id, body) = match s.split_once('=') {
            Some((id, body)) if !id.contains(char::is_whitespace) && !id.contains(':') => {
                (Some(id.trim().to_string()), body.trim())
            }
            _ => (None, s),
        };
        let spec = if let Some(cmd) = body.strip_prefix("pre:") {
            if cmd.trim().is_empty() {
                return Err(Error::Config("empty preprocessor command".into()));
            }
            VariantSpec::preprocessed(id.unwrap_or_else(|| "preprocessed".into()), cmd.trim())
        } else {
            let encoder: EncoderKind = body
                .parse()
                .map_err(|e: Error| Error::Config(e.to_string()))?;
            VariantSpec {
                id: id.unwrap_or_else(|| encoder.name().to_string()),
                encoder,
                preprocessor: None,
            }
        };
        if spec.id.is_empty() || spec.id.contains([',', '"', '\n']) {
            return Err(Error::Config(format!("invalid variant id '{}'", spec.id)));
        }
        Ok(spec)
    }
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.preprocessor {
            Some(cmd) => write!(f, "{}=pre:{cmd}", self.id),
            None => write!(f, "{}={}", self.id, self.encoder),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HarnessOptions {
    pub cache_dir: PathBuf,
    pub workers: usize,
    pub keep_intermediates: bool,
    pub qps: Vec<u32>,
}

impl HarnessOptions {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        HarnessOptions {
            cache_dir: cache_dir.into(),
            workers: crate::pool::default_workers(),
            keep_intermediates: false,
            qps: CANONICAL_QPS.to_vec(),
        }
    }
}

/// A job that did not produce a scored encode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub sequence: String,
    pub variant: String,
    pub qp: Option<u32>,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    /// Ordered by sequence (manifest order), variant (baseline first), qp.
    pub encodes: Vec<ScoredEncode>,
    pub failures: Vec<JobFailure>,
}

/// Everything needed to interpret a run later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub ffmpeg: PathBuf,
    pub tool_version: String,
    pub qps: Vec<u32>,
    pub workers: usize,
    pub pooling: String,
    pub metric_filter: String,
    pub encoder_commands: BTreeMap<String, String>,
    pub variants: Vec<String>,
}

pub struct Harness {
    tools: Toolchain,
    cache: Cache,
    memo: DigestMemo,
    opts: HarnessOptions,
}

impl Harness {
    pub fn new(tools: Toolchain, opts: HarnessOptions) -> Result<Self> {
        if opts.qps.is_empty() {
            return Err(Error::Config("QP grid is empty".into()));
        }
        let cache = Cache::open(&opts.cache_dir)?;
        std::fs::create_dir_all(work_dir(&cache))
            .map_err(|e| Error::io(format!("create {}", work_dir(&cache).display()), e))?;
        Ok(Harness {
            tools,
            cache,
            memo: DigestMemo::default(),
            opts,
        })
    }

    pub fn tools(&self) -> &Toolchain {
        &self.tools
    }

    pub fn options(&self) -> &HarnessOptions {
        &self.opts
    }

    pub fn key(&self, job: &EncodeJob) -> Result<String> {
        let input = self.memo.sha256(&job.input)?;
        Ok(cache_key(
            &input,
            &job.canonical_command(),
            &self.tools.version,
        ))
    }

    /// Produces the stream for `job`, or reuses a cached one whose digest
    /// still matches. The returned encode carries no scores.
    pub fn encode(&self, job: &EncodeJob) -> Result<ScoredEncode> {
        let expected = job.sequence.frames * job.sequence.geometry.frame_len() as u64;
        let actual = std::fs::metadata(&job.input)
            .map_err(|e| Error::io(format!("stat {}", job.input.display()), e))?
            .len();
        if actual != expected {
            return Err(Error::Geometry {
                path: job.input.clone(),
                message: format!(
                    "{actual} bytes, expected {expected} for {} frames of {}",
                    job.sequence.frames, job.sequence.geometry
                ),
            });
        }
        let key = self.key(job)?;
        let stream = self.cache.stream_path(&key);
        if let Some(mut hit) = self.cache.load::<ScoredEncode>(&key) {
            if stream.is_file() && md5_file(&stream)? == hit.stream_digest {
                hit.job = job.clone();
                hit.scores.clear();
                return Ok(hit);
            }
        }

        let tmp = self.cache.scratch(".mp4")?;
        let args = job.encode_args(&job.input, &tmp);
        run(Command::new(&self.tools.ffmpeg).args(&args), "ffmpeg")?;
        let stream_bytes = std::fs::metadata(&tmp)
            .map_err(|e| Error::io(format!("stat {}", tmp.display()), e))?
            .len();
        if stream_bytes == 0 {
            return Err(Error::Tool {
                tool: "ffmpeg".into(),
                command: job.canonical_command(),
                message: "produced an empty stream".into(),
                output: String::new(),
            });
        }
        let stream_digest = md5_file(&tmp)?;
        self.cache.adopt_stream(&key, tmp)?;
        let enc = ScoredEncode {
            job: job.clone(),
            stream_bytes,
            bitrate_kbps: bitrate_kbps(stream_bytes, job.sequence.fps, job.sequence.frames),
            stream_digest,
            tool_version: self.tools.version.clone(),
            command: job.canonical_command(),
            scores: BTreeMap::new(),
        };
        self.cache.store(&key, &enc)?;
        Ok(enc)
    }

    /// Path of the cached stream behind `enc`.
    pub fn stream_path(&self, enc: &ScoredEncode) -> Result<PathBuf> {
        Ok(self.cache.stream_path(&self.key(&enc.job)?))
    }

    /// Decodes the stream, checks the frame count against `reference`, and
    /// runs one libvmaf pass for all four metrics.
    pub fn score(&self, reference: &SequenceSpec, mut enc: ScoredEncode) -> Result<ScoredEncode> {
        let ref_digest = self.memo.sha256(&reference.path)?;
        let key = combine(&[
            "score",
            &enc.stream_digest,
            &ref_digest,
            vmaf::VMAF_FILTER_TEMPLATE,
            &self.tools.version,
        ]);
        if let Some(scores) = self.cache.load(&key) {
            enc.scores = scores;
            return Ok(enc);
        }

        let stream = self.stream_path(&enc)?;
        let dir = tempfile::Builder::new()
            .prefix("score-")
            .tempdir_in(work_dir(&self.cache))
            .map_err(|e| Error::io("create scoring dir", e))?;
        let decoded = dir.path().join("decoded.yuv");
        run(
            Command::new(&self.tools.ffmpeg)
                .args(["-y", "-v", "error", "-threads", "1", "-i"])
                .arg(&stream)
                .args(["-f", "rawvideo", "-pix_fmt", "yuv420p"])
                .arg(&decoded),
            "ffmpeg",
        )?;
        let g = reference.geometry;
        let got = std::fs::metadata(&decoded)
            .map_err(|e| Error::io(format!("stat {}", decoded.display()), e))?
            .len();
        let want = reference.frames * g.frame_len() as u64;
        if got != want {
            return Err(Error::Geometry {
                path: stream,
                message: format!(
                    "decoded {} bytes ({:.2} frames), reference has {} frames",
                    got,
                    got as f64 / g.frame_len() as f64,
                    reference.frames
                ),
            });
        }

        let size = format!("{}x{}", g.width, g.height);
        let fps = format_fps(reference.fps);
        let reference_path = std::fs::canonicalize(&reference.path)
            .map_err(|e| Error::io(format!("resolve {}", reference.path.display()), e))?;
        let raw_in = |p: &Path| -> Vec<std::ffi::OsString> {
            let mut v: Vec<std::ffi::OsString> = [
                "-f", "rawvideo", "-pix_fmt", "yuv420p", "-s", &size, "-r", &fps, "-i",
            ]
            .iter()
            .map(Into::into)
            .collect();
            v.push(p.as_os_str().to_owned());
            v
        };
        // Relative log path keeps the filter string free of escaping issues.
        run(
            Command::new(&self.tools.ffmpeg)
                .current_dir(dir.path())
                .args(["-v", "error"])
                .args(raw_in(&decoded))
                .args(raw_in(&reference_path))
                .arg("-lavfi")
                .arg(vmaf::vmaf_filter("vmaf.json"))
                .args(["-f", "null", "-"]),
            "ffmpeg/libvmaf",
        )?;
        let scores = vmaf::read_log(&dir.path().join("vmaf.json"), reference.frames)?;

        if self.opts.keep_intermediates {
            let keep = work_dir(&self.cache).join(format!("{}.decoded.yuv", &key[..16]));
            std::fs::rename(&decoded, &keep)
                .map_err(|e| Error::io(format!("keep {}", keep.display()), e))?;
        }
        self.cache.store(&key, &scores)?;
        enc.scores = scores;
        Ok(enc)
    }

    pub fn encode_and_score(&self, job: &EncodeJob) -> Result<ScoredEncode> {
        let enc = self.encode(job)?;
        self.score(&job.sequence, enc)
    }

    /// Raw input for `variant` on `seq`: the original file, or the output of
    /// one preprocessor run.
    fn prepare_input(&self, seq: &SequenceSpec, variant: &VariantSpec) -> Result<PathBuf> {
        let Some(cmd) = &variant.preprocessor else {
            return Ok(seq.path.clone());
        };
        let out = work_dir(&self.cache).join(format!(
            "{}__{}.yuv",
            sanitize(&seq.id),
            sanitize(&variant.id)
        ));
        preprocess::run_preprocessor(cmd, &seq.path, &out, seq.geometry)?;
        Ok(out)
    }

    /// Runs every (sequence, leg, qp) job. The baseline leg always runs and
    /// never depends on the variant legs. Failures are collected, not fatal.
    pub fn sweep(&self, sequences: &[SequenceSpec], variants: &[VariantSpec]) -> SweepOutcome {
        let mut legs = vec![VariantSpec::baseline()];
        legs.extend(variants.iter().filter(|v| v.id != BASELINE_ID).cloned());

        let mut outcome = SweepOutcome::default();
        let mut prepared: Vec<(usize, usize)> = Vec::new();
        for (si, seq) in sequences.iter().enumerate() {
            if let Err(e) = seq.verify() {
                for v in &legs {
                    outcome.failures.push(failure(seq, v, None, &e));
                }
                continue;
            }
            prepared.extend((0..legs.len()).map(|vi| (si, vi)));
        }

        let inputs = parallel_map(&prepared, self.opts.workers, |&(si, vi)| {
            self.prepare_input(&sequences[si], &legs[vi])
        });
        let mut jobs = Vec::new();
        let mut temp_inputs = Vec::new();
        for (&(si, vi), input) in prepared.iter().zip(inputs) {
            let (seq, v) = (&sequences[si], &legs[vi]);
            match input {
                Ok(path) => {
                    if v.preprocessor.is_some() {
                        temp_inputs.push(path.clone());
                    }
                    for &qp in &self.opts.qps {
                        let mut job = EncodeJob::new(seq, v.id.clone(), qp, v.encoder);
                        job.input = path.clone();
                        job.preprocessor = v.preprocessor.clone();
                        jobs.push(job);
                    }
                }
                Err(e) => outcome.failures.push(failure(seq, v, None, &e)),
            }
        }

        let results = parallel_map(&jobs, self.opts.workers, |job| self.encode_and_score(job));
        for (job, r) in jobs.iter().zip(results) {
            match r {
                Ok(enc) => outcome.encodes.push(enc),
                Err(e) => outcome.failures.push(JobFailure {
                    sequence: job.sequence.id.clone(),
                    variant: job.variant_id.clone(),
                    qp: Some(job.qp),
                    message: e.to_string(),
                }),
            }
        }
        if !self.opts.keep_intermediates {
            for p in temp_inputs {
                let _ = std::fs::remove_file(p);
            }
        }
        outcome
    }

    /// Baseline curve and, when a preprocessor is given, the preprocessed
    /// leg's curve. Both legs are scored against the original input.
    pub fn run_two_legs(
        &self,
        sequence: &SequenceSpec,
        preprocessor: Option<&str>,
    ) -> Result<(RDCurve, Option<RDCurve>)> {
        let variants: Vec<VariantSpec> = preprocessor
            .map(|cmd| VariantSpec::preprocessed("preprocessed", cmd))
            .into_iter()
            .collect();
        let out = self.sweep(std::slice::from_ref(sequence), &variants);
        if let Some(f) = out.failures.first() {
            return Err(Error::Tool {
                tool: "harness".into(),
                command: format!("{} / {} / qp {:?}", f.sequence, f.variant, f.qp),
                message: f.message.clone(),
                output: String::new(),
            });
        }
        let mut curves = curves_from_encodes(&out.encodes);
        let baseline = curves
            .remove(&(sequence.id.clone(), BASELINE_ID.to_string()))
            .ok_or_else(|| Error::invalid("baseline leg produced no points"))?;
        let variant = curves.into_values().next();
        Ok((baseline, variant))
    }

    pub fn metadata(&self, variants: &[VariantSpec]) -> RunMetadata {
        let probe = SequenceSpec {
            id: "probe".into(),
            path: PathBuf::from("<yuv>"),
            geometry: crate::yuv::Geometry {
                width: 0,
                height: 0,
            },
            fps: 0.0,
            frames: 0,
            pix_fmt: "yuv420p".into(),
        };
        let encoder_commands = EncoderKind::ALL
            .into_iter()
            .map(|k| {
                let cmd = EncodeJob::new(&probe, "", 0, k)
                    .canonical_command()
                    .replace("-s 0x0 -r 0", "-s <W>x<H> -r <FPS>")
                    .replace("-qp 0", "-qp <Q>");
                (k.name().to_string(), cmd)
            })
            .collect();
        RunMetadata {
            ffmpeg: self.tools.ffmpeg.clone(),
            tool_version: self.tools.version.clone(),
            qps: self.opts.qps.clone(),
            workers: self.opts.workers,
            pooling: vmaf::POOLING.into(),
            metric_filter: vmaf::VMAF_FILTER_TEMPLATE.into(),
            encoder_commands,
            variants: std::iter::once(VariantSpec::baseline())
                .chain(variants.iter().cloned())
                .map(|v| v.to_string())
                .collect(),
        }
    }
}

fn work_dir(cache: &Cache) -> PathBuf {
    cache.root().join("work")
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn failure(seq: &SequenceSpec, v: &VariantSpec, qp: Option<u32>, e: &Error) -> JobFailure {
    JobFailure {
        sequence: seq.id.clone(),
        variant: v.id.clone(),
        qp,
        message: e.to_string(),
    }
}

/// Groups scored encodes into curves keyed by (sequence, variant), points in
/// ascending QP.
pub fn curves_from_encodes(encodes: &[ScoredEncode]) -> BTreeMap<(String, String), RDCurve> {
    let mut out: BTreeMap<(String, String), RDCurve> = BTreeMap::new();
    for e in encodes {
        let key = (e.job.sequence.id.clone(), e.job.variant_id.clone());
        let curve = out
            .entry(key)
            .or_insert_with(|| RDCurve::new(&e.job.sequence.id, &e.job.variant_id));
        let mut p = RDPoint::new(e.job.qp, e.bitrate_kbps);
        p.scores = e.scores.clone();
        curve.points.push(p);
    }
    for c in out.values_mut() {
        c.sort_by_qp();
    }
    out
}
