//! DCT-domain encoder rate estimator and its calibration against real
//! encoder bits-per-pixel.
//!
//! The score of a patch at a QP is `mean(ln(1 + |q|))` over every quantized
//! 8×8 DCT coefficient of all three planes, where `q` is the coefficient
//! divided by the JPEG table entry for the QP's mapped quality and rounded to
//! nearest (ties away from zero). Chroma coefficients count once each, so at
//! 4:2:0 the luma plane contributes two thirds of the mean.

mod calibrate;
mod dct;
mod quant;

pub use calibrate::{
    calibrate, read_measurements_csv, run_calibration, write_fit_csv, write_measurements_csv,
    CalibrationFit, RateMeasurement,
};
pub use dct::{dct8x8, idct8x8, Block};
pub use quant::{
    quality_scale, quant_table, scaled_table, QpQualityMap, QuantTable, QuantTables, BASE_CHROMA,
    BASE_LUMA, QP_MAX, QP_MIN,
};

pub use crate::yuv::YuvPatch;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::yuv::RawVideo;

/// Counts of `|quantized coefficient|` values. Summing per magnitude keeps the
/// score independent of block order.
#[derive(Debug, Default, Clone)]
struct MagnitudeHistogram {
    counts: BTreeMap<u32, u64>,
    total: u64,
}

impl MagnitudeHistogram {
    fn add_plane(&mut self, plane: &[u8], width: usize, height: usize, table: &QuantTable) {
        for by in (0..height).step_by(8) {
            for bx in (0..width).step_by(8) {
                let mut block = [[0.0; 8]; 8];
                for (y, row) in block.iter_mut().enumerate() {
                    let start = (by + y) * width + bx;
                    for (x, v) in row.iter_mut().enumerate() {
                        *v = f64::from(plane[start + x]) - 128.0;
                    }
                }
                let coeffs = dct8x8(&block);
                for (crow, qrow) in coeffs.iter().zip(table) {
                    for (c, &q) in crow.iter().zip(qrow) {
                        let level = (c / f64::from(q)).round().abs() as u32;
                        *self.counts.entry(level).or_default() += 1;
                        self.total += 1;
                    }
                }
            }
        }
    }

    fn mean_log1p(&self) -> f64 {
        let sum: f64 = self
            .counts
            .iter()
            .map(|(&k, &n)| n as f64 * f64::from(k).ln_1p())
            .sum();
        sum / self.total as f64
    }
}

fn check_tileable(patch: &YuvPatch) -> Result<()> {
    let (w, h) = (patch.width, patch.height);
    if w % 16 != 0 || h % 16 != 0 {
        return Err(Error::invalid(format!(
            "patch {w}x{h}: every plane must tile into 8x8 blocks (luma dimensions multiple of 16 at 4:2:0)"
        )));
    }
    Ok(())
}

/// Rate score of `patch` at `qp` under the given QP-to-quality map.
pub fn rate_score_with(patch: &YuvPatch, qp: u32, map: &QpQualityMap) -> Result<f64> {
    check_tileable(patch)?;
    let tables = quant_table(qp, map)?;
    let (w, h) = (patch.width as usize, patch.height as usize);
    let mut hist = MagnitudeHistogram::default();
    hist.add_plane(&patch.y, w, h, &tables.luma);
    hist.add_plane(&patch.cb, w / 2, h / 2, &tables.chroma);
    hist.add_plane(&patch.cr, w / 2, h / 2, &tables.chroma);
    Ok(hist.mean_log1p())
}

/// Rate score under the default QP-to-quality map.
pub fn rate_score(patch: &YuvPatch, qp: u32) -> Result<f64> {
    rate_score_with(patch, qp, &QpQualityMap::default())
}

/// Anything that can turn a single-frame patch into an encoded stream.
pub trait PatchEncoder: Sync {
    /// Returns the size in bytes of the encoded stream.
    fn encoded_bytes(&self, patch: &YuvPatch, qp: u32) -> Result<u64>;
}

/// Bits per luma pixel of `patch` encoded at `qp`.
pub fn measure_real_bpp(patch: &YuvPatch, qp: u32, encoder: &dyn PatchEncoder) -> Result<f64> {
    let bytes = encoder.encoded_bytes(patch, qp)?;
    bpp_from_bytes(bytes, patch.width, patch.height, 1)
}

pub fn bpp_from_bytes(bytes: u64, width: u32, height: u32, frames: u64) -> Result<f64> {
    if bytes == 0 {
        return Err(Error::invalid("encoded stream is empty"));
    }
    let pixels = u64::from(width) * u64::from(height) * frames;
    if pixels == 0 {
        return Err(Error::invalid("zero pixel count"));
    }
    Ok((bytes * 8) as f64 / pixels as f64)
}

/// A patch cut out of a source video, with a stable identifier.
#[derive(Debug, Clone)]
pub struct ExtractedPatch {
    pub id: String,
    pub patch: YuvPatch,
}

/// Seeded random crops of `size`×`size` from `video`. Crop origins are even
/// so chroma stays aligned; positions are never repeated.
pub fn extract_patches(
    video: &RawVideo,
    count: usize,
    size: u32,
    seed: u64,
) -> Result<Vec<ExtractedPatch>> {
    let g = video.geometry();
    if size == 0 || size % 16 != 0 {
        return Err(Error::invalid(format!(
            "patch size {size} must be a multiple of 16"
        )));
    }
    if size > g.width || size > g.height {
        return Err(Error::invalid(format!(
            "patch size {size} exceeds source {g}"
        )));
    }
    let xs = (g.width - size) / 2 + 1;
    let ys = (g.height - size) / 2 + 1;
    let positions = video.frame_count() * u64::from(xs) * u64::from(ys);
    if (count as u64) > positions {
        return Err(Error::invalid(format!(
            "cannot draw {count} distinct patches from {positions} positions"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut picks = Vec::with_capacity(count);
    while picks.len() < count {
        let f = rng.gen_range(0..video.frame_count());
        let x = 2 * rng.gen_range(0..xs);
        let y = 2 * rng.gen_range(0..ys);
        if seen.insert((f, x, y)) {
            picks.push((f, x, y));
        }
    }

    let mut frames: BTreeMap<u64, YuvPatch> = BTreeMap::new();
    let mut out = Vec::with_capacity(count);
    for (f, x, y) in picks {
        let frame = match frames.entry(f) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(video.read_frame(f)?),
        };
        out.push(ExtractedPatch {
            id: format!("f{f:04}_x{x:04}_y{y:04}"),
            patch: frame.crop(x, y, size, size)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yuv::Geometry;
    use rand::Rng;

    fn noise_patch(rng: &mut ChaCha8Rng, w: u32, h: u32) -> YuvPatch {
        let g = Geometry::new(w, h).unwrap();
        let mut plane = |n: usize| (0..n).map(|_| rng.gen::<u8>()).collect::<Vec<_>>();
        let y = plane(g.luma_len());
        let cb = plane(g.chroma_len());
        let cr = plane(g.chroma_len());
        YuvPatch::new(w, h, y, cb, cr).unwrap()
    }

    /// Independent scorer: naive DCT per block, entrywise quantization,
    /// direct log-sum in raster order.
    fn oracle_score(patch: &YuvPatch, qp: u32) -> f64 {
        use std::f64::consts::PI;
        let t = quant_table(qp, &QpQualityMap::default()).unwrap();
        let mut sum = 0.0;
        let mut n = 0usize;
        let planes: [(&[u8], usize, usize, &QuantTable); 3] = [
            (
                &patch.y,
                patch.width as usize,
                patch.height as usize,
                &t.luma,
            ),
            (
                &patch.cb,
                patch.width as usize / 2,
                patch.height as usize / 2,
                &t.chroma,
            ),
            (
                &patch.cr,
                patch.width as usize / 2,
                patch.height as usize / 2,
                &t.chroma,
            ),
        ];
        for (plane, w, h, table) in planes {
            for by in (0..h).step_by(8) {
                for bx in (0..w).step_by(8) {
                    for u in 0..8 {
                        for v in 0..8 {
                            let au = if u == 0 { (0.125f64).sqrt() } else { 0.5 };
                            let av = if v == 0 { (0.125f64).sqrt() } else { 0.5 };
                            let mut s = 0.0;
                            for y in 0..8 {
                                for x in 0..8 {
                                    let px = f64::from(plane[(by + y) * w + bx + x]) - 128.0;
                                    s += px
                                        * ((2 * y + 1) as f64 * u as f64 * PI / 16.0).cos()
                                        * ((2 * x + 1) as f64 * v as f64 * PI / 16.0).cos();
                                }
                            }
                            let c = au * av * s;
                            let q = c / f64::from(table[u][v]);
                            let r = q.signum() * (q.abs() + 0.5).floor();
                            sum += (1.0 + r.abs()).ln();
                            n += 1;
                        }
                    }
                }
            }
        }
        sum / n as f64
    }

    #[test]
    fn flat_mid_grey_scores_zero() {
        let p = YuvPatch::uniform(256, 256, 128).unwrap();
        assert_eq!(rate_score(&p, 22).unwrap(), 0.0);
    }

    #[test]
    fn checkerboard_matches_composed_oracle() {
        // 8x8 checkerboard tile (0/255) repeated over a 16x16 patch, neutral chroma
        let mut y = vec![0u8; 256];
        for r in 0..16 {
            for c in 0..16 {
                y[r * 16 + c] = if (r + c) % 2 == 0 { 255 } else { 0 };
            }
        }
        let p = YuvPatch::new(16, 16, y, vec![128; 64], vec![128; 64]).unwrap();
        for qp in [18, 22, 27, 32, 37, 40] {
            let s = rate_score(&p, qp).unwrap();
            assert!((s - oracle_score(&p, qp)).abs() < 1e-12, "qp {qp}");
            assert!(s > 0.0);
        }
    }

    #[test]
    fn random_patches_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let p = noise_patch(&mut rng, 32, 16);
            for qp in [18, 29, 40] {
                assert!((rate_score(&p, qp).unwrap() - oracle_score(&p, qp)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_tileable_patches() {
        let p = YuvPatch::uniform(24, 16, 0).unwrap();
        assert!(matches!(rate_score(&p, 22), Err(Error::InvalidInput(_))));
        let p = YuvPatch::uniform(8, 8, 0).unwrap();
        assert!(rate_score(&p, 22).is_err());
        let p = YuvPatch::uniform(16, 16, 0).unwrap();
        assert!(rate_score(&p, 41).is_err());
    }

    #[test]
    fn block_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = noise_patch(&mut rng, 32, 32);
        // swap the two top luma blocks and the matching chroma blocks (2x2 of 16x16 -> swap
        // left/right halves of the top half)
        let mut q = p.clone();
        for row in 0..16 {
            for col in 0..16 {
                q.y[row * 32 + col] = p.y[row * 32 + col + 16];
                q.y[row * 32 + col + 16] = p.y[row * 32 + col];
            }
        }
        for row in 0..8 {
            for col in 0..8 {
                for (dst, src) in [(&mut q.cb, &p.cb), (&mut q.cr, &p.cr)] {
                    dst[row * 16 + col] = src[row * 16 + col + 8];
                    dst[row * 16 + col + 8] = src[row * 16 + col];
                }
            }
        }
        assert_ne!(p, q);
        for qp in [18, 30, 40] {
            assert_eq!(rate_score(&p, qp).unwrap(), rate_score(&q, qp).unwrap());
        }
    }

    #[test]
    fn bpp_arithmetic() {
        assert_eq!(bpp_from_bytes(1024, 256, 256, 1).unwrap(), 0.125);
        assert!(bpp_from_bytes(0, 256, 256, 1).is_err());
    }

    struct FixedSize(u64);

    impl PatchEncoder for FixedSize {
        fn encoded_bytes(&self, _: &YuvPatch, _: u32) -> Result<u64> {
            Ok(self.0)
        }
    }

    #[test]
    fn measure_uses_luma_pixels() {
        let p = YuvPatch::uniform(256, 256, 90).unwrap();
        assert_eq!(measure_real_bpp(&p, 22, &FixedSize(1024)).unwrap(), 0.125);
        assert!(measure_real_bpp(&p, 22, &FixedSize(0)).is_err());
    }

    #[test]
    fn extraction_is_seeded_and_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("src_64x48.yuv");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut bytes = Vec::new();
        for _ in 0..3 {
            bytes.extend(noise_patch(&mut rng, 64, 48).to_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let v = RawVideo::open(&path, Geometry::new(64, 48).unwrap()).unwrap();
        let a = extract_patches(&v, 20, 32, 42).unwrap();
        let b = extract_patches(&v, 20, 32, 42).unwrap();
        let c = extract_patches(&v, 20, 32, 43).unwrap();
        let ids = |p: &[ExtractedPatch]| p.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_ne!(ids(&a), ids(&c));
        let uniq: std::collections::BTreeSet<_> = ids(&a).into_iter().collect();
        assert_eq!(uniq.len(), 20);
        assert!(a
            .iter()
            .all(|e| e.patch.width == 32 && e.patch.height == 32));
        assert!(extract_patches(&v, 5, 24, 0).is_err());
        assert!(extract_patches(&v, 5, 80, 0).is_err());
    }
}
