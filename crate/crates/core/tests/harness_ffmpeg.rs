//! End-to-end harness runs against the ffmpeg found on this machine. Each
//! test returns early with a note when no suitable ffmpeg is present.

use std::path::{Path, PathBuf};

use rdbench_core::bd::bd_rate;
use rdbench_core::harness::{
    curves_from_encodes, EncodeJob, EncoderKind, Harness, HarnessOptions, SequenceSpec, Toolchain,
    VariantSpec,
};
use rdbench_core::{Geometry, MetricKind};

fn tools() -> Option<Toolchain> {
    let t = Toolchain::discover(None).ok()?;
    if t.supports(&["libx264", "libx265"], &["libvmaf", "hqdn3d", "unsharp"]) {
        Some(t)
    } else {
        eprintln!("skipping: ffmpeg lacks libx264/libx265/libvmaf");
        None
    }
}

fn testdata() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../testdata/natural_384x384_8f.yuv")
}

/// First `frames` frames of the natural test clip, cropped to 256x192.
fn small_clip(dir: &Path, frames: u64) -> SequenceSpec {
    let src = std::fs::read(testdata()).unwrap();
    let g = Geometry::new(384, 384).unwrap();
    let out_g = Geometry::new(256, 192).unwrap();
    let mut out = Vec::new();
    for f in 0..frames as usize {
        let frame =
            rdbench_core::YuvPatch::from_bytes(g, &src[f * g.frame_len()..(f + 1) * g.frame_len()])
                .unwrap();
        out.extend(frame.crop(64, 96, 256, 192).unwrap().to_bytes());
    }
    let path = dir.join("clip_256x192.yuv");
    std::fs::write(&path, out).unwrap();
    SequenceSpec {
        id: "clip".into(),
        path,
        geometry: out_g,
        fps: 30.0,
        frames,
        pix_fmt: "yuv420p".into(),
    }
}

fn harness(t: &Toolchain, cache: &Path) -> Harness {
    let mut o = HarnessOptions::new(cache);
    o.workers = 4;
    Harness::new(t.clone(), o).unwrap()
}

#[test]
fn same_job_twice_gives_identical_streams() {
    let Some(t) = tools() else { return };
    let dir = tempfile::tempdir().unwrap();
    let seq = small_clip(dir.path(), 4);
    let job = EncodeJob::new(&seq, "baseline", 27, EncoderKind::X264Medium);
    let a = harness(&t, &dir.path().join("c1")).encode(&job).unwrap();
    let b = harness(&t, &dir.path().join("c2")).encode(&job).unwrap();
    assert_eq!(a.stream_digest, b.stream_digest);
    assert_eq!(a.stream_bytes, b.stream_bytes);
    let h = harness(&t, &dir.path().join("c1"));
    let stream = h.stream_path(&a).unwrap();
    let on_disk = std::fs::metadata(stream).unwrap().len();
    let recomputed = 8.0 * on_disk as f64 * seq.fps / (seq.frames as f64 * 1000.0);
    assert!((recomputed - a.bitrate_kbps).abs() <= 1e-3 * a.bitrate_kbps);
    // cache hit returns the same record
    assert_eq!(h.encode(&job).unwrap().stream_digest, a.stream_digest);
}

#[test]
fn tune_psnr_and_tune_ssim_streams_match() {
    let Some(t) = tools() else { return };
    let dir = tempfile::tempdir().unwrap();
    let seq = small_clip(dir.path(), 4);
    let h = harness(&t, &dir.path().join("c"));
    for qp in [22, 37] {
        let p = h
            .encode(&EncodeJob::new(&seq, "p", qp, EncoderKind::X264TunePsnr))
            .unwrap();
        let s = h
            .encode(&EncodeJob::new(&seq, "s", qp, EncoderKind::X264TuneSsim))
            .unwrap();
        assert_eq!(p.stream_digest, s.stream_digest, "qp {qp}");
    }
}

#[test]
fn every_panel_encoder_runs() {
    let Some(t) = tools() else { return };
    let dir = tempfile::tempdir().unwrap();
    let seq = small_clip(dir.path(), 2);
    let h = harness(&t, &dir.path().join("c"));
    for k in EncoderKind::ALL {
        let e = h.encode(&EncodeJob::new(&seq, k.name(), 32, k)).unwrap();
        assert!(e.stream_bytes > 0, "{k}");
        assert!(e.command.contains("-threads 1"));
    }
}

#[test]
fn identity_preprocessor_gives_identical_legs() {
    let Some(t) = tools() else { return };
    let dir = tempfile::tempdir().unwrap();
    let seq = small_clip(dir.path(), 4);
    let h = harness(&t, &dir.path().join("c"));
    let out = h.sweep(
        std::slice::from_ref(&seq),
        &[VariantSpec::preprocessed("copy", "cp {in} {out}")],
    );
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    assert_eq!(out.encodes.len(), 8);
    for qp in [22, 27, 32, 37] {
        let d: Vec<&str> = out
            .encodes
            .iter()
            .filter(|e| e.job.qp == qp)
            .map(|e| e.stream_digest.as_str())
            .collect();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0], d[1]);
    }
    let curves = curves_from_encodes(&out.encodes);
    let b = &curves[&("clip".to_string(), "baseline".to_string())];
    let v = &curves[&("clip".to_string(), "copy".to_string())];
    for p in &b.points {
        let vmaf = p.score(MetricKind::Vmaf).unwrap();
        assert!((0.0..=100.0).contains(&vmaf));
        let ssim = p.score(MetricKind::MsSsim).unwrap();
        assert!((0.0..=1.0).contains(&ssim));
    }
    assert!(
        bd_rate(b, v, MetricKind::Vmaf)
            .unwrap()
            .bd_rate_percent
            .abs()
            < 1e-9
    );
}

#[test]
fn baseline_leg_is_unaffected_by_variant_legs() {
    let Some(t) = tools() else { return };
    let dir = tempfile::tempdir().unwrap();
    let seq = small_clip(dir.path(), 2);
    let alone = harness(&t, &dir.path().join("c1")).sweep(std::slice::from_ref(&seq), &[]);
    let with = harness(&t, &dir.path().join("c2")).sweep(
        std::slice::from_ref(&seq),
        &["x264-unsharp".parse().unwrap()],
    );
    let digests = |o: &rdbench_core::harness::SweepOutcome| -> Vec<String> {
        o.encodes
            .iter()
            .filter(|e| e.job.variant_id == "baseline")
            .map(|e| e.stream_digest.clone())
            .collect()
    };
    assert_eq!(digests(&alone), digests(&with));
    assert_eq!(with.encodes.len(), 8);
}

#[test]
fn resizing_preprocessor_is_rejected() {
    let Some(t) = tools() else { return };
    let dir = tempfile::tempdir().unwrap();
    let seq = small_clip(dir.path(), 2);
    let h = harness(&t, &dir.path().join("c"));
    let shrink = "sh -c 'head -c 1000 \"$0\" > \"$1\"' {in} {out}";
    let err = h.run_two_legs(&seq, Some(shrink)).unwrap_err();
    assert!(err.to_string().contains("geometry"), "{err}");
}

#[test]
fn frame_count_mismatch_is_a_hard_error() {
    let Some(t) = tools() else { return };
    let dir = tempfile::tempdir().unwrap();
    let seq = small_clip(dir.path(), 4);
    let h = harness(&t, &dir.path().join("c"));
    let enc = h
        .encode(&EncodeJob::new(&seq, "b", 32, EncoderKind::X264Medium))
        .unwrap();
    let short = small_clip(&dir.path().join("x").tap_mkdir(), 3);
    let mut reference = seq.clone();
    reference.path = short.path.clone();
    reference.frames = 3;
    assert!(h.score(&reference, enc).is_err());
}

trait Mkdir {
    fn tap_mkdir(self) -> PathBuf;
}

impl Mkdir for PathBuf {
    fn tap_mkdir(self) -> PathBuf {
        std::fs::create_dir_all(&self).unwrap();
        self
    }
}
