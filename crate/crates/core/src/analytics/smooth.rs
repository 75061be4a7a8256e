use super::AuxStats;
use crate::error::{Error, Result};
use crate::stats::{mean, population_std};
use crate::yuv::{RawVideo, YuvPatch};

/// Block variance below which an 8×8 luma block counts as flat, in squared
/// 8-bit code values.
pub const DEFAULT_SMOOTH_VARIANCE: f64 = 4.0;

/// Fraction of 8×8 blocks of `plane` whose population variance is below
/// `threshold`.
pub fn smooth_fraction(plane: &[u8], width: usize, height: usize, threshold: f64) -> Result<f64> {
    if width == 0 || height == 0 || width % 8 != 0 || height % 8 != 0 {
        return Err(Error::invalid(format!(
            "luma plane {width}x{height} is not 8x8 tileable"
        )));
    }
    if plane.len() != width * height {
        return Err(Error::invalid(format!(
            "luma plane has {} samples, expected {}",
            plane.len(),
            width * height
        )));
    }
    let (bw, bh) = (width / 8, height / 8);
    let mut flat = 0usize;
    for by in 0..bh {
        for bx in 0..bw {
            let (mut s, mut s2) = (0u64, 0u64);
            for r in 0..8 {
                let row = &plane[(by * 8 + r) * width + bx * 8..][..8];
                for &v in row {
                    s += u64::from(v);
                    s2 += u64::from(v) * u64::from(v);
                }
            }
            // exact integer numerator: 64·Σv² − (Σv)²
            let var = (64 * s2 - s * s) as f64 / 4096.0;
            if var < threshold {
                flat += 1;
            }
        }
    }
    Ok(flat as f64 / (bw * bh) as f64)
}

pub fn smooth_fraction_of(frame: &YuvPatch, threshold: f64) -> Result<f64> {
    smooth_fraction(
        &frame.y,
        frame.width as usize,
        frame.height as usize,
        threshold,
    )
}

/// Mean of the Cb and Cr population standard deviations.
pub fn chroma_spread(frame: &YuvPatch) -> Result<f64> {
    let to_f = |p: &[u8]| p.iter().map(|&v| f64::from(v)).collect::<Vec<_>>();
    mean(&[
        population_std(&to_f(&frame.cb))?,
        population_std(&to_f(&frame.cr))?,
    ])
}

/// Frame-averaged statistics over `frames`.
pub fn aux_stats(frames: &[YuvPatch], threshold: f64) -> Result<AuxStats> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames"));
    }
    let smooth = frames
        .iter()
        .map(|f| smooth_fraction_of(f, threshold))
        .collect::<Result<Vec<_>>>()?;
    let spread = frames
        .iter()
        .map(chroma_spread)
        .collect::<Result<Vec<_>>>()?;
    Ok(AuxStats {
        smooth_fraction: mean(&smooth)?,
        chroma_spread: Some(mean(&spread)?),
    })
}

/// `aux_stats` over at most `max_frames` frames spread evenly through
/// `video`.
pub fn video_aux_stats(video: &RawVideo, threshold: f64, max_frames: u64) -> Result<AuxStats> {
    let n = video.frame_count();
    if n == 0 || max_frames == 0 {
        return Err(Error::invalid("no frames to sample"));
    }
    let take = n.min(max_frames);
    let frames = (0..take)
        .map(|i| video.read_frame(i * n / take))
        .collect::<Result<Vec<_>>>()?;
    aux_stats(&frames, threshold)
}
