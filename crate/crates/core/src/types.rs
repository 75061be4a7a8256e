//! Domain types shared by every module: metrics, RD samples and curves.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The constant-QP grid every canonical run uses.
pub const CANONICAL_QPS: [u32; 4] = [22, 27, 32, 37];

/// Quality metrics extracted by a single metric-tool pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Vmaf,
    VmafNeg,
    PsnrY,
    MsSsim,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Vmaf,
        MetricKind::VmafNeg,
        MetricKind::PsnrY,
        MetricKind::MsSsim,
    ];

    /// Column key used in CSV files and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            MetricKind::Vmaf => "vmaf",
            MetricKind::VmafNeg => "vmaf_neg",
            MetricKind::PsnrY => "psnr_y",
            MetricKind::MsSsim => "ms_ssim",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Vmaf => "VMAF",
            MetricKind::VmafNeg => "VMAF-NEG",
            MetricKind::PsnrY => "PSNR-Y",
            MetricKind::MsSsim => "MS-SSIM",
        }
    }

    /// Closed range of valid scores. PSNR-Y is open at both ends in theory;
    /// the tool caps it well below 100 dB.
    pub fn valid_range(self) -> (f64, f64) {
        match self {
            MetricKind::Vmaf | MetricKind::VmafNeg => (0.0, 100.0),
            MetricKind::PsnrY => (0.0, 100.0),
            MetricKind::MsSsim => (0.0, 1.0),
        }
    }

    pub fn is_valid_score(self, v: f64) -> bool {
        let (lo, hi) = self.valid_range();
        match self {
            MetricKind::PsnrY => v.is_finite() && v > lo && v < hi,
            _ => v.is_finite() && v >= lo && v <= hi,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '-' { '_' } else { c })
            .collect();
        match norm.as_str() {
            "vmaf" => Ok(MetricKind::Vmaf),
            "vmaf_neg" | "vmafneg" => Ok(MetricKind::VmafNeg),
            "psnr_y" | "psnr" | "psnry" => Ok(MetricKind::PsnrY),
            "ms_ssim" | "msssim" => Ok(MetricKind::MsSsim),
            _ => Err(Error::invalid(format!("unknown metric '{s}'"))),
        }
    }
}

/// One constant-QP sample of an RD curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDPoint {
    pub qp: u32,
    pub bitrate_kbps: f64,
    pub scores: BTreeMap<MetricKind, f64>,
}

impl RDPoint {
    pub fn new(qp: u32, bitrate_kbps: f64) -> Self {
        RDPoint {
            qp,
            bitrate_kbps,
            scores: BTreeMap::new(),
        }
    }

    pub fn with_score(mut self, metric: MetricKind, value: f64) -> Self {
        self.scores.insert(metric, value);
        self
    }

    pub fn score(&self, metric: MetricKind) -> Option<f64> {
        self.scores.get(&metric).copied()
    }
}

/// The RD curve of one (sequence, variant) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDCurve {
    pub sequence_id: String,
    pub variant_id: String,
    pub points: Vec<RDPoint>,
}

impl RDCurve {
    pub fn new(sequence_id: impl Into<String>, variant_id: impl Into<String>) -> Self {
        RDCurve {
            sequence_id: sequence_id.into(),
            variant_id: variant_id.into(),
            points: Vec::new(),
        }
    }

    /// Checks ordering and positivity: ascending qp, bitrate strictly
    /// decreasing with qp, at least two points.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::invalid(format!(
                "curve {}/{} has {} point(s), need at least 2",
                self.sequence_id,
                self.variant_id,
                self.points.len()
            )));
        }
        for p in &self.points {
            if !(p.bitrate_kbps.is_finite() && p.bitrate_kbps > 0.0) {
                return Err(Error::invalid(format!(
                    "curve {}/{}: non-positive bitrate {} at qp {}",
                    self.sequence_id, self.variant_id, p.bitrate_kbps, p.qp
                )));
            }
        }
        for w in self.points.windows(2) {
            if w[1].qp <= w[0].qp {
                return Err(Error::invalid(format!(
                    "curve {}/{}: qp not strictly ascending ({} then {})",
                    self.sequence_id, self.variant_id, w[0].qp, w[1].qp
                )));
            }
            if w[1].bitrate_kbps >= w[0].bitrate_kbps {
                return Err(Error::invalid(format!(
                    "curve {}/{}: bitrate does not decrease from qp {} to qp {}",
                    self.sequence_id, self.variant_id, w[0].qp, w[1].qp
                )));
            }
        }
        Ok(())
    }

    /// True when the curve sits exactly on the canonical four-QP grid.
    pub fn is_canonical(&self) -> bool {
        self.points.len() == CANONICAL_QPS.len()
            && self
                .points
                .iter()
                .zip(CANONICAL_QPS)
                .all(|(p, qp)| p.qp == qp)
    }

    pub fn sort_by_qp(&mut self) {
        self.points.sort_by_key(|p| p.qp);
    }

    /// The point at the lowest QP, i.e. the top of the quality range.
    pub fn lowest_qp_point(&self) -> Option<&RDPoint> {
        self.points.iter().min_by_key(|p| p.qp)
    }
}

/// Pooled correlation statistics between a predictor and a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub spearman_rho: f64,
    pub pearson_r: f64,
    /// Mean absolute error, in target units.
    pub mae: f64,
    pub n: usize,
}
