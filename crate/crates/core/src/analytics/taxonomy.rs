use std::fmt;

use serde::{Deserialize, Serialize};

use super::SequenceRecord;
use crate::types::MetricKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Both VMAF and VMAF-NEG deltas above this (pp) make a regression.
    pub regression_pp: f64,
    /// Smooth-block share at or above which a regression is a rate-floor case.
    pub smooth_fraction: f64,
    /// Baseline VMAF at the lowest QP at or above which saturation is possible.
    pub saturation_quality: f64,
    /// Minimum |BD-VMAF − BD-VMAF-NEG| (pp) read as strong metric disagreement.
    pub disagreement_pp: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            regression_pp: 10.0,
            smooth_fraction: 0.5,
            saturation_quality: 98.0,
            disagreement_pp: 25.0,
        }
    }
}

impl fmt::Display for Thresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "regression>{}pp, smooth>={}, saturation>={}, disagreement>={}pp",
            self.regression_pp, self.smooth_fraction, self.saturation_quality, self.disagreement_pp
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureLabel {
    RateFloorViolation,
    DistributionShift,
    MetricSaturation,
    NoFailure,
}

impl FailureLabel {
    /// 2 for regressions, 1 for saturation, 0 for none.
    pub fn severity(self) -> u8 {
        match self {
            FailureLabel::RateFloorViolation | FailureLabel::DistributionShift => 2,
            FailureLabel::MetricSaturation => 1,
            FailureLabel::NoFailure => 0,
        }
    }
}

impl fmt::Display for FailureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureLabel::RateFloorViolation => "rate-floor-violation",
            FailureLabel::DistributionShift => "distribution-shift",
            FailureLabel::MetricSaturation => "metric-saturation",
            FailureLabel::NoFailure => "no-failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub sequence_id: String,
    pub label: FailureLabel,
    pub low_confidence: bool,
    pub evidence: Vec<String>,
}

pub fn classify_failure(record: &SequenceRecord, t: &Thresholds) -> Classification {
    let mut evidence = vec![format!("thresholds: {t}")];
    let mut low_confidence = false;
    let vmaf = record.bd.get(&MetricKind::Vmaf).copied();
    let neg = record.bd.get(&MetricKind::VmafNeg).copied();
    let done = |label, low_confidence, evidence| Classification {
        sequence_id: record.sequence_id.clone(),
        label,
        low_confidence,
        evidence,
    };

    let (Some(vmaf), Some(neg)) = (vmaf, neg) else {
        evidence.push("BD-VMAF or BD-VMAF-NEG missing; no label reachable".into());
        return done(FailureLabel::NoFailure, true, evidence);
    };
    evidence.push(format!("BD-VMAF {vmaf:+.2}%, BD-VMAF-NEG {neg:+.2}%"));

    if vmaf > t.regression_pp && neg > t.regression_pp {
        evidence.push("both perceptual deltas are regressions".into());
        let label = match record.aux {
            Some(aux) => {
                evidence.push(format!("smooth fraction {:.3}", aux.smooth_fraction));
                if let Some(c) = aux.chroma_spread {
                    evidence.push(format!("chroma spread {c:.2}"));
                }
                if aux.smooth_fraction >= t.smooth_fraction {
                    FailureLabel::RateFloorViolation
                } else {
                    FailureLabel::DistributionShift
                }
            }
            None => {
                low_confidence = true;
                evidence
                    .push("no frame statistics; rate-floor violation not distinguishable".into());
                FailureLabel::DistributionShift
            }
        };
        return done(label, low_confidence, evidence);
    }

    match record.baseline_top_quality {
        Some(top) => {
            let gap = (vmaf - neg).abs();
            if top >= t.saturation_quality && gap >= t.disagreement_pp {
                evidence.push(format!("baseline top VMAF {top:.2}, metric gap {gap:.2}pp"));
                return done(FailureLabel::MetricSaturation, low_confidence, evidence);
            }
        }
        None => {
            low_confidence = true;
            evidence.push("baseline top quality unknown; saturation not checked".into());
        }
    }
    done(FailureLabel::NoFailure, low_confidence, evidence)
}

#[cfg(test)]
mod tests {
    use super::super::AuxStats;
    use super::*;
    use proptest::prelude::*;

    fn rec(vmaf: f64, neg: f64) -> SequenceRecord {
        SequenceRecord::from_values("s", [vmaf, neg, 0.0, 0.0])
    }

    fn aux(s: f64) -> AuxStats {
        AuxStats {
            smooth_fraction: s,
            chroma_spread: None,
        }
    }

    #[test]
    fn all_negative_is_no_failure() {
        let r = SequenceRecord::from_values("s", [-20.0, -5.0, -1.0, -2.0]).with_top_quality(95.0);
        let c = classify_failure(&r, &Thresholds::default());
        assert_eq!(c.label, FailureLabel::NoFailure);
        assert!(!c.low_confidence);
        assert!(c.evidence[0].starts_with("thresholds:"));
    }

    #[test]
    fn regression_without_aux_is_low_confidence_shift() {
        let c = classify_failure(&rec(50.0, 60.0), &Thresholds::default());
        assert_eq!(c.label, FailureLabel::DistributionShift);
        assert!(c.low_confidence);
    }

    #[test]
    fn saturation_needs_high_top_quality_and_disagreement() {
        let t = Thresholds::default();
        let r = rec(-56.09, -13.33).with_top_quality(98.5);
        assert_eq!(
            classify_failure(&r, &t).label,
            FailureLabel::MetricSaturation
        );
        let r = rec(-56.09, -13.33).with_top_quality(95.0);
        assert_eq!(classify_failure(&r, &t).label, FailureLabel::NoFailure);
        let r = rec(-20.0, -13.33).with_top_quality(99.0);
        assert_eq!(classify_failure(&r, &t).label, FailureLabel::NoFailure);
    }

    proptest! {
        #[test]
        fn raising_regression_threshold_never_raises_severity(
            vmaf in -100.0f64..300.0,
            neg in -100.0f64..300.0,
            smooth in 0.0f64..1.0,
            top in 80.0f64..100.0,
            lo in 0.0f64..100.0,
            step in 0.0f64..200.0,
        ) {
            let r = rec(vmaf, neg).with_aux(aux(smooth)).with_top_quality(top);
            let t1 = Thresholds { regression_pp: lo, ..Thresholds::default() };
            let t2 = Thresholds { regression_pp: lo + step, ..Thresholds::default() };
            let a = classify_failure(&r, &t1);
            let b = classify_failure(&r, &t2);
            prop_assert!(b.label.severity() <= a.label.severity());
            prop_assert_eq!(classify_failure(&r, &t1), a);
        }
    }
}
