//! Corpus aggregation, failure taxonomy and gaming detection over
//! per-sequence BD results.

mod aggregate;
mod gaming;
mod smooth;
mod taxonomy;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::MetricKind;

pub use aggregate::{aggregate, CorpusSlice, MetricStats, SliceSpec};
pub use gaming::{gaming_signature, GamingVerdict, DEFAULT_GAMING_MARGIN, NEG_AGREEMENT};
pub use smooth::{
    aux_stats, chroma_spread, smooth_fraction, smooth_fraction_of, video_aux_stats,
    DEFAULT_SMOOTH_VARIANCE,
};
pub use taxonomy::{classify_failure, Classification, FailureLabel, Thresholds};

/// Frame statistics that let the taxonomy tell failure modes apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxStats {
    /// Share of flat 8×8 luma blocks.
    pub smooth_fraction: f64,
    /// Mean of the Cb and Cr plane standard deviations; small values mean
    /// near-monochrome chroma.
    pub chroma_spread: Option<f64>,
}

/// BD results of one sequence across metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub sequence_id: String,
    /// Percent, negative means the variant saves bits.
    pub bd: BTreeMap<MetricKind, f64>,
    /// Baseline VMAF at the lowest QP, when known.
    pub baseline_top_quality: Option<f64>,
    pub aux: Option<AuxStats>,
}

impl SequenceRecord {
    pub fn new(sequence_id: impl Into<String>) -> Self {
        SequenceRecord {
            sequence_id: sequence_id.into(),
            bd: BTreeMap::new(),
            baseline_top_quality: None,
            aux: None,
        }
    }

    /// Record with the four metrics in `MetricKind::ALL` order.
    pub fn from_values(sequence_id: impl Into<String>, values: [f64; 4]) -> Self {
        let mut r = SequenceRecord::new(sequence_id);
        r.bd = MetricKind::ALL.into_iter().zip(values).collect();
        r
    }

    pub fn with_aux(mut self, aux: AuxStats) -> Self {
        self.aux = Some(aux);
        self
    }

    pub fn with_top_quality(mut self, q: f64) -> Self {
        self.baseline_top_quality = Some(q);
        self
    }
}
