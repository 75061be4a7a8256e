//! Per-sequence BD summaries from RD curves, and their console rendering.

use std::fmt::Write as _;

use super::csvio::{Cell, SummaryRow, MEAN_ROW};
use crate::analytics::{Classification, CorpusSlice, SequenceRecord};
use crate::bd::{bd_rate_with, BdOptions};
use crate::error::{Error, Result};
use crate::stats::mean;
use crate::types::{MetricKind, RDCurve};

/// BD results of one variant against the baseline across a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: String,
    /// One row per sequence in curve order, then the mean row.
    pub rows: Vec<SummaryRow>,
    /// Per-sequence records with the baseline's top VMAF filled in.
    pub records: Vec<SequenceRecord>,
    /// `(sequence, metric or None for the whole row, message)`.
    pub errors: Vec<(String, Option<MetricKind>, String)>,
}

impl VariantSummary {
    pub fn is_partial(&self) -> bool {
        !self.errors.is_empty()
    }

    pub fn mean(&self, m: MetricKind) -> Option<f64> {
        self.rows
            .last()
            .filter(|r| r.is_mean())
            .and_then(|r| r.get(m).value())
    }
}

/// Non-baseline variant ids in order of first appearance.
pub fn variant_ids(curves: &[RDCurve], baseline: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in curves {
        if c.variant_id != baseline && !out.contains(&c.variant_id) {
            out.push(c.variant_id.clone());
        }
    }
    out
}

pub fn summarize(
    curves: &[RDCurve],
    baseline: &str,
    variant: &str,
    opts: &BdOptions,
) -> Result<VariantSummary> {
    if !curves.iter().any(|c| c.variant_id == baseline) {
        return Err(Error::Config(format!(
            "no rows for baseline variant '{baseline}'"
        )));
    }
    if !curves.iter().any(|c| c.variant_id == variant) {
        return Err(Error::Config(format!("no rows for variant '{variant}'")));
    }
    let mut sequences: Vec<&str> = Vec::new();
    for c in curves {
        if !sequences.contains(&c.sequence_id.as_str()) {
            sequences.push(&c.sequence_id);
        }
    }

    let find = |seq: &str, var: &str| {
        curves
            .iter()
            .find(|c| c.sequence_id == seq && c.variant_id == var)
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for seq in sequences {
        let (Some(b), Some(v)) = (find(seq, baseline), find(seq, variant)) else {
            let which = if find(seq, baseline).is_none() {
                baseline
            } else {
                variant
            };
            errors.push((
                seq.to_string(),
                None,
                format!("no rows for variant '{which}'"),
            ));
            rows.push(SummaryRow {
                sequence: seq.to_string(),
                cells: [Cell::Error; 4],
            });
            continue;
        };
        let mut cells = [Cell::Missing; 4];
        let mut rec = SequenceRecord::new(seq);
        for (k, m) in MetricKind::ALL.into_iter().enumerate() {
            let has_scores = |c: &RDCurve| c.points.iter().all(|p| p.score(m).is_some());
            if !has_scores(b) && !has_scores(v) {
                continue;
            }
            match bd_rate_with(b, v, m, *opts) {
                Ok(r) => {
                    cells[k] = Cell::Value(r.bd_rate_percent);
                    rec.bd.insert(m, r.bd_rate_percent);
                }
                Err(e) => {
                    cells[k] = Cell::Error;
                    errors.push((seq.to_string(), Some(m), e.to_string()));
                }
            }
        }
        rec.baseline_top_quality = b.lowest_qp_point().and_then(|p| p.score(MetricKind::Vmaf));
        rows.push(SummaryRow {
            sequence: seq.to_string(),
            cells,
        });
        records.push(rec);
    }

    let mut mean_cells = [Cell::Missing; 4];
    for (k, c) in mean_cells.iter_mut().enumerate() {
        let vals: Vec<f64> = rows.iter().filter_map(|r| r.cells[k].value()).collect();
        if !vals.is_empty() {
            *c = Cell::Value(mean(&vals)?);
        }
    }
    rows.push(SummaryRow {
        sequence: MEAN_ROW.into(),
        cells: mean_cells,
    });
    Ok(VariantSummary {
        variant: variant.to_string(),
        rows,
        records,
        errors,
    })
}

/// Signed two-decimal display form.
pub fn pct(v: f64) -> String {
    let s = format!("{v:+.2}");
    if s == "-0.00" {
        "+0.00".into()
    } else {
        s
    }
}

fn render_cell(c: Cell) -> String {
    match c {
        Cell::Value(v) => format!("{}%", pct(v)),
        Cell::Error => "ERROR".into(),
        Cell::Missing => "-".into(),
    }
}

fn table(header: &[String], body: &[Vec<String>]) -> String {
    let cols = header.len();
    let width: Vec<usize> = (0..cols)
        .map(|i| {
            body.iter()
                .map(|r| r[i].chars().count())
                .chain(std::iter::once(header[i].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                write!(out, "{:<w$}", c, w = width[i]).unwrap();
            } else {
                write!(out, "  {:>w$}", c, w = width[i]).unwrap();
            }
        }
        out.push('\n');
    };
    line(&mut out, header);
    let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule);
    for r in body {
        line(&mut out, r);
    }
    out
}

const LABELS: [&str; 4] = ["BD-VMAF", "BD-VMAF-NEG", "BD-PSNR-Y", "BD-MS-SSIM"];

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut header = vec!["Sequence".to_string()];
    header.extend(LABELS.iter().map(|s| s.to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.sequence.clone()];
            v.extend(r.cells.iter().map(|c| render_cell(*c)));
            v
        })
        .collect();
    table(&header, &body)
}

/// One block per slice: mean, median, std, min, max and wins per metric.
pub fn render_slices(slices: &[CorpusSlice]) -> String {
    let mut header = vec!["Slice".to_string(), "n".to_string(), "stat".to_string()];
    header.extend(LABELS.iter().map(|s| s.to_string()));
    let mut body = Vec::new();
    for s in slices {
        let stat_row = |name: &str, f: &dyn Fn(MetricKind) -> String| {
            let mut v = vec![s.name.clone(), s.n().to_string(), name.to_string()];
            v.extend(MetricKind::ALL.into_iter().map(f));
            v
        };
        let get = |m: MetricKind, g: fn(&crate::analytics::MetricStats) -> f64| {
            s.stats
                .get(&m)
                .map(|st| format!("{}%", pct(g(st))))
                .unwrap_or_else(|| "-".into())
        };
        body.push(stat_row("mean", &|m| get(m, |st| st.mean)));
        body.push(stat_row("median", &|m| get(m, |st| st.median)));
        body.push(stat_row("std", &|m| {
            s.stats
                .get(&m)
                .map(|st| format!("{:.2}", st.std))
                .unwrap_or_else(|| "-".into())
        }));
        body.push(stat_row("min", &|m| get(m, |st| st.min)));
        body.push(stat_row("max", &|m| get(m, |st| st.max)));
        body.push(stat_row("wins", &|m| {
            s.stats
                .get(&m)
                .map(|st| format!("{}/{}", st.wins, st.n))
                .unwrap_or_else(|| "-".into())
        }));
    }
    table(&header, &body)
}

pub fn render_classifications(items: &[Classification]) -> String {
    let header = ["Sequence", "Label", "Confidence", "Evidence"].map(String::from);
    let body: Vec<Vec<String>> = items
        .iter()
        .map(|c| {
            vec![
                c.sequence_id.clone(),
                c.label.to_string(),
                if c.low_confidence { "low" } else { "normal" }.to_string(),
                c.evidence[1..].join("; "),
            ]
        })
        .collect();
    let mut out = table(&header, &body);
    if let Some(first) = items.first() {
        out.push_str(&first.evidence[0]);
        out.push('\n');
    }
    out
}
