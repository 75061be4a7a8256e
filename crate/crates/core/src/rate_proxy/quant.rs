//! JPEG quantization tables and the QP to JPEG-quality mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type QuantTable = [[u16; 8]; 8];

/// Supported QP range of the rate proxy.
pub const QP_MIN: u32 = 18;
pub const QP_MAX: u32 = 40;

/// Annex K luminance table.
pub const BASE_LUMA: QuantTable = [
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
];

/// Annex K chrominance table.
pub const BASE_CHROMA: QuantTable = [
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
];

/// IJG quality-to-scale convention.
pub fn quality_scale(quality: u32) -> Result<u32> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!(
            "JPEG quality {quality} outside [1, 100]"
        )));
    }
    Ok(if quality < 50 {
        5000 / quality
    } else {
        200 - 2 * quality
    })
}

/// Scales `base` for `quality`, clamping entries to [1, 255].
pub fn scaled_table(base: &QuantTable, quality: u32) -> Result<QuantTable> {
    let scale = quality_scale(quality)?;
    let mut out = [[0u16; 8]; 8];
    for (orow, brow) in out.iter_mut().zip(base) {
        for (o, &b) in orow.iter_mut().zip(brow) {
            let v = (u32::from(b) * scale + 50) / 100;
            *o = v.clamp(1, 255) as u16;
        }
    }
    Ok(out)
}

/// Piecewise-linear, strictly decreasing QP to JPEG-quality map through two
/// anchors, rounded to the nearest integer quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpQualityMap {
    pub qp_low: u32,
    pub quality_at_qp_low: u32,
    pub qp_high: u32,
    pub quality_at_qp_high: u32,
}

impl Default for QpQualityMap {
    fn default() -> Self {
        QpQualityMap {
            qp_low: 18,
            quality_at_qp_low: 75,
            qp_high: 40,
            quality_at_qp_high: 10,
        }
    }
}

impl QpQualityMap {
    pub fn validate(&self) -> Result<()> {
        if self.qp_high <= self.qp_low {
            return Err(Error::Config(
                "qp_to_quality anchors need qp_low < qp_high".into(),
            ));
        }
        if self.quality_at_qp_high >= self.quality_at_qp_low {
            return Err(Error::Config(
                "qp_to_quality must be strictly decreasing (quality at qp_low > quality at qp_high)".into(),
            ));
        }
        for q in [self.quality_at_qp_low, self.quality_at_qp_high] {
            if !(1..=100).contains(&q) {
                return Err(Error::Config(format!(
                    "anchor quality {q} outside [1, 100]"
                )));
            }
        }
        Ok(())
    }

    pub fn quality(&self, qp: u32) -> Result<u32> {
        if !(QP_MIN..=QP_MAX).contains(&qp) {
            return Err(Error::invalid(format!(
                "qp {qp} outside the supported range [{QP_MIN}, {QP_MAX}]"
            )));
        }
        self.validate()?;
        let t = (qp as f64 - self.qp_low as f64) / (self.qp_high as f64 - self.qp_low as f64);
        let q = self.quality_at_qp_low as f64
            + t * (self.quality_at_qp_high as f64 - self.quality_at_qp_low as f64);
        Ok(q.round().clamp(1.0, 100.0) as u32)
    }
}

/// Luma and chroma tables for one QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantTables {
    pub quality: u32,
    pub luma: QuantTable,
    pub chroma: QuantTable,
}

pub fn quant_table(qp: u32, map: &QpQualityMap) -> Result<QuantTables> {
    let quality = map.quality(qp)?;
    Ok(QuantTables {
        quality,
        luma: scaled_table(&BASE_LUMA, quality)?,
        chroma: scaled_table(&BASE_CHROMA, quality)?,
    })
}
