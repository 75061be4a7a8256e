use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SequenceRecord;
use crate::error::{Error, Result};
use crate::stats::{lower_median, mean, median, population_std};
use crate::types::MetricKind;

/// A named cut: every record except the listed sequence ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SliceSpec {
    pub name: String,
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl SliceSpec {
    pub fn all() -> Self {
        SliceSpec {
            name: "all".into(),
            exclude: Vec::new(),
        }
    }

    pub fn excluding(name: impl Into<String>, ids: &[&str]) -> Self {
        SliceSpec {
            name: name.into(),
            exclude: ids.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub n: usize,
    pub mean: f64,
    /// Average of the middle two for even `n`.
    pub median: f64,
    pub lower_median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Sequences with a negative delta.
    pub wins: usize,
}

impl MetricStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        Ok(MetricStats {
            n: values.len(),
            mean: mean(values)?,
            median: median(values)?,
            lower_median: lower_median(values)?,
            std: population_std(values)?,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            wins: values.iter().filter(|v| **v < 0.0).count(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSlice {
    pub name: String,
    /// Included ids, in input order.
    pub included: Vec<String>,
    /// Excluded ids that matched no record.
    pub unmatched_exclusions: Vec<String>,
    /// Per metric, over the included records that carry it.
    pub stats: BTreeMap<MetricKind, MetricStats>,
}

impl CorpusSlice {
    pub fn n(&self) -> usize {
        self.included.len()
    }

    pub fn win_count(&self, metric: MetricKind) -> Option<usize> {
        self.stats.get(&metric).map(|s| s.wins)
    }
}

pub fn aggregate(records: &[SequenceRecord], spec: &SliceSpec) -> Result<CorpusSlice> {
    let included: Vec<&SequenceRecord> = records
        .iter()
        .filter(|r| !spec.exclude.contains(&r.sequence_id))
        .collect();
    if included.is_empty() {
        return Err(Error::InvalidSlice(format!(
            "slice '{}' is empty after excluding {:?}",
            spec.name, spec.exclude
        )));
    }
    for r in &included {
        for (m, v) in &r.bd {
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{}: non-finite {m} delta",
                    r.sequence_id
                )));
            }
        }
    }
    let mut stats = BTreeMap::new();
    for m in MetricKind::ALL {
        let values: Vec<f64> = included
            .iter()
            .filter_map(|r| r.bd.get(&m).copied())
            .collect();
        if !values.is_empty() {
            stats.insert(m, MetricStats::of(&values)?);
        }
    }
    Ok(CorpusSlice {
        name: spec.name.clone(),
        included: included.iter().map(|r| r.sequence_id.clone()).collect(),
        unmatched_exclusions: spec
            .exclude
            .iter()
            .filter(|id| !records.iter().any(|r| &r.sequence_id == *id))
            .cloned()
            .collect(),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recs(values: &[f64]) -> Vec<SequenceRecord> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut r = SequenceRecord::new(format!("s{i}"));
                r.bd.insert(MetricKind::Vmaf, v);
                r
            })
            .collect()
    }

    #[test]
    fn single_record_slice() {
        let s = aggregate(&recs(&[-3.5]), &SliceSpec::all()).unwrap();
        let st = s.stats[&MetricKind::Vmaf];
        assert_eq!((st.mean, st.median, st.std, st.wins), (-3.5, -3.5, 0.0, 1));
        assert!(!s.stats.contains_key(&MetricKind::PsnrY));
    }

    #[test]
    fn empty_slice_is_an_error() {
        let r = recs(&[1.0]);
        let spec = SliceSpec::excluding("none", &["s0"]);
        assert!(matches!(aggregate(&r, &spec), Err(Error::InvalidSlice(_))));
    }

    #[test]
    fn unmatched_exclusions_are_reported() {
        let s = aggregate(
            &recs(&[1.0, 2.0]),
            &SliceSpec::excluding("x", &["s1", "nope"]),
        )
        .unwrap();
        assert_eq!(s.included, ["s0"]);
        assert_eq!(s.unmatched_exclusions, ["nope"]);
    }

    proptest! {
        #[test]
        fn matches_direct_formulas(values in prop::collection::vec(-300.0f64..300.0, 1..40)) {
            let s = aggregate(&recs(&values), &SliceSpec::all()).unwrap().stats[&MetricKind::Vmaf];
            let n = values.len() as f64;
            let m = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let k = sorted.len();
            let med = if k % 2 == 1 { sorted[k / 2] } else { (sorted[k / 2 - 1] + sorted[k / 2]) / 2.0 };
            prop_assert!((s.mean - m).abs() <= 1e-12);
            prop_assert!((s.std - var.sqrt()).abs() <= 1e-12);
            prop_assert_eq!(s.median, med);
            prop_assert_eq!(s.wins, values.iter().filter(|v| **v < 0.0).count());
        }
    }
}
