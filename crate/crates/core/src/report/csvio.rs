//! Per-QP and summary CSV files.
//!
//! Canonical form: fixed header, `\n` line ends, floats in shortest
//! round-trip notation, empty cells for missing scores and `ERROR` for
//! failed deltas. Parsing a canonical file and writing it back is
//! byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::{AuxStats, SequenceRecord};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::types::{MetricKind, RDCurve, RDPoint};

pub const PER_QP_HEADER: [&str; 8] = [
    "sequence",
    "variant",
    "qp",
    "bitrate_kbps",
    "vmaf",
    "vmaf_neg",
    "psnr_y",
    "ms_ssim",
];

pub const SUMMARY_HEADER: [&str; 5] = [
    "sequence",
    "bd_vmaf",
    "bd_vmaf_neg",
    "bd_psnr_y",
    "bd_ms_ssim",
];

/// Sequence label of the aggregate row in summary files.
pub const MEAN_ROW: &str = "mean";
pub const ERROR_CELL: &str = "ERROR";

/// Alternative column spellings mapped onto canonical names. Lookups ignore
/// case and any non-alphanumeric characters, so `BD-VMAF-NEG` already
/// matches `bd_vmaf_neg` without an entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnAliases(pub BTreeMap<String, String>);

impl Default for ColumnAliases {
    fn default() -> Self {
        let pairs = [
            ("seq", "sequence"),
            ("sequence_id", "sequence"),
            ("clip", "sequence"),
            ("name", "sequence"),
            ("video", "sequence"),
            ("variant_id", "variant"),
            ("arm", "variant"),
            ("leg", "variant"),
            ("method", "variant"),
            ("bitrate", "bitrate_kbps"),
            ("kbps", "bitrate_kbps"),
            ("rate_kbps", "bitrate_kbps"),
            ("vmafneg", "vmaf_neg"),
            ("psnr", "psnr_y"),
            ("psnr_luma", "psnr_y"),
            ("msssim", "ms_ssim"),
            ("float_ms_ssim", "ms_ssim"),
            ("bdrate_vmaf", "bd_vmaf"),
            ("bd_rate_vmaf", "bd_vmaf"),
            ("bdrate_vmaf_neg", "bd_vmaf_neg"),
            ("bd_rate_vmaf_neg", "bd_vmaf_neg"),
            ("bd_psnr", "bd_psnr_y"),
            ("bdrate_psnr", "bd_psnr_y"),
            ("bd_rate_psnr", "bd_psnr_y"),
            ("bd_rate_psnr_y", "bd_psnr_y"),
            ("bd_msssim", "bd_ms_ssim"),
            ("bd_rate_ms_ssim", "bd_ms_ssim"),
        ];
        ColumnAliases(
            pairs
                .iter()
                .map(|(a, c)| (a.to_string(), c.to_string()))
                .collect(),
        )
    }
}

fn norm(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl ColumnAliases {
    /// Adds `extra` on top of the built-in table.
    pub fn with(mut self, extra: &BTreeMap<String, String>) -> Self {
        self.0
            .extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        self
    }

    /// Column index of every canonical name in `canonical`, or an error
    /// naming the first one that is missing.
    fn resolve(
        &self,
        header: &csv::StringRecord,
        canonical: &[&str],
        required: &[&str],
    ) -> Result<Vec<Option<usize>>> {
        let target = |name: &str| -> Option<String> {
            let n = norm(name);
            if let Some(c) = canonical.iter().find(|c| norm(c) == n) {
                return Some(c.to_string());
            }
            self.0
                .iter()
                .find(|(alias, _)| norm(alias) == n)
                .map(|(_, c)| c.clone())
        };
        let mut idx: Vec<Option<usize>> = vec![None; canonical.len()];
        for (i, h) in header.iter().enumerate() {
            let h = h.trim_start_matches('\u{feff}');
            if let Some(t) = target(h) {
                if let Some(k) = canonical.iter().position(|c| *c == t) {
                    if idx[k].is_none() {
                        idx[k] = Some(i);
                    }
                }
            }
        }
        for r in required {
            let k = canonical
                .iter()
                .position(|c| c == r)
                .expect("required is canonical");
            if idx[k].is_none() {
                return Err(Error::Parse {
                    line: 1,
                    message: format!(
                        "missing column '{r}' (header: {})",
                        header.iter().collect::<Vec<_>>().join(",")
                    ),
                });
            }
        }
        Ok(idx)
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_num(cell: &str, line: u64, column: &str) -> Result<f64> {
    let t = cell.trim().trim_end_matches('%').replace('\u{2212}', "-");
    let t = t.strip_prefix('+').unwrap_or(&t);
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("column '{column}': '{cell}' is not a finite number"),
        })
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQpRow {
    pub sequence: String,
    pub variant: String,
    pub qp: u32,
    pub bitrate_kbps: f64,
    pub scores: BTreeMap<MetricKind, f64>,
}

const METRIC_COLUMNS: [(MetricKind, &str); 4] = [
    (MetricKind::Vmaf, "vmaf"),
    (MetricKind::VmafNeg, "vmaf_neg"),
    (MetricKind::PsnrY, "psnr_y"),
    (MetricKind::MsSsim, "ms_ssim"),
];

pub fn parse_per_qp(text: &str, aliases: &ColumnAliases) -> Result<Vec<PerQpRow>> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let idx = aliases.resolve(
        &header,
        &PER_QP_HEADER,
        &["sequence", "variant", "qp", "bitrate_kbps"],
    )?;
    let mut rows: Vec<PerQpRow> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let cell = |k: usize| idx[k].and_then(|i| rec.get(i)).unwrap_or("");
        let qp_cell = cell(2);
        let qp = qp_cell.parse::<u32>().map_err(|_| Error::Parse {
            line,
            message: format!("column 'qp': '{qp_cell}' is not a non-negative integer"),
        })?;
        let bitrate = parse_num(cell(3), line, "bitrate_kbps")?;
        if bitrate <= 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("bitrate_kbps must be positive, got {bitrate}"),
            });
        }
        let mut scores = BTreeMap::new();
        for (k, (m, name)) in METRIC_COLUMNS.iter().enumerate() {
            let c = cell(4 + k);
            if !c.is_empty() {
                scores.insert(*m, parse_num(c, line, name)?);
            }
        }
        let row = PerQpRow {
            sequence: cell(0).to_string(),
            variant: cell(1).to_string(),
            qp,
            bitrate_kbps: bitrate,
            scores,
        };
        if row.sequence.is_empty() || row.variant.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty sequence or variant".into(),
            });
        }
        if !seen.insert((row.sequence.clone(), row.variant.clone(), qp)) {
            return Err(Error::Parse {
                line,
                message: format!(
                    "duplicate row for ({}, {}, qp {qp})",
                    row.sequence, row.variant
                ),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_per_qp_string(rows: &[PerQpRow]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(PER_QP_HEADER).expect("in-memory write");
    for r in rows {
        let mut rec = vec![
            r.sequence.clone(),
            r.variant.clone(),
            r.qp.to_string(),
            fmt_f64(r.bitrate_kbps),
        ];
        rec.extend(
            METRIC_COLUMNS
                .iter()
                .map(|(m, _)| r.scores.get(m).map(|v| fmt_f64(*v)).unwrap_or_default()),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn read_per_qp(path: &Path, aliases: &ColumnAliases) -> Result<Vec<PerQpRow>> {
    parse_per_qp(&read_text(path)?, aliases)
}

pub fn write_per_qp(path: &Path, rows: &[PerQpRow]) -> Result<()> {
    atomic_write(path, write_per_qp_string(rows).as_bytes())
}

/// Groups rows into curves keyed by (sequence, variant), points in
/// ascending QP. Keys iterate in first-appearance order of sequences.
pub fn curves_from_rows(rows: &[PerQpRow]) -> Vec<RDCurve> {
    let mut out: Vec<RDCurve> = Vec::new();
    for r in rows {
        let pos = out
            .iter()
            .position(|c| c.sequence_id == r.sequence && c.variant_id == r.variant);
        let curve = match pos {
            Some(i) => &mut out[i],
            None => {
                out.push(RDCurve::new(&r.sequence, &r.variant));
                out.last_mut().unwrap()
            }
        };
        let mut p = RDPoint::new(r.qp, r.bitrate_kbps);
        p.scores = r.scores.clone();
        curve.points.push(p);
    }
    for c in &mut out {
        c.sort_by_qp();
    }
    out
}

pub fn rows_from_curves(curves: &[RDCurve]) -> Vec<PerQpRow> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| PerQpRow {
                sequence: c.sequence_id.clone(),
                variant: c.variant_id.clone(),
                qp: p.qp,
                bitrate_kbps: p.bitrate_kbps,
                scores: p.scores.clone(),
            })
        })
        .collect()
}

/// One summary cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Value(f64),
    Error,
    Missing,
}

impl Cell {
    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }

    fn render(self) -> String {
        match self {
            Cell::Value(v) => fmt_f64(v),
            Cell::Error => ERROR_CELL.into(),
            Cell::Missing => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sequence: String,
    /// In `MetricKind::ALL` order.
    pub cells: [Cell; 4],
}

impl SummaryRow {
    pub fn is_mean(&self) -> bool {
        self.sequence == MEAN_ROW
    }

    pub fn has_error(&self) -> bool {
        self.cells.iter().any(|c| matches!(c, Cell::Error))
    }

    pub fn get(&self, m: MetricKind) -> Cell {
        let k = MetricKind::ALL
            .iter()
            .position(|x| *x == m)
            .expect("known metric");
        self.cells[k]
    }
}

pub fn parse_summary(text: &str, aliases: &ColumnAliases) -> Result<Vec<SummaryRow>> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let idx = aliases.resolve(&header, &SUMMARY_HEADER, &["sequence"])?;
    if idx[1..].iter().all(Option::is_none) {
        return Err(Error::Parse {
            line: 1,
            message: "no BD metric columns found".into(),
        });
    }
    let mut rows = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let cell = |k: usize| idx[k].and_then(|i| rec.get(i)).unwrap_or("");
        let sequence = cell(0).to_string();
        if sequence.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty sequence".into(),
            });
        }
        if !seen.insert(sequence.clone()) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate sequence '{sequence}'"),
            });
        }
        let mut cells = [Cell::Missing; 4];
        for (k, c) in cells.iter_mut().enumerate() {
            let raw = cell(k + 1);
            *c = if raw.is_empty() {
                Cell::Missing
            } else if raw.eq_ignore_ascii_case(ERROR_CELL) {
                Cell::Error
            } else {
                Cell::Value(parse_num(raw, line, SUMMARY_HEADER[k + 1])?)
            };
        }
        rows.push(SummaryRow { sequence, cells });
    }
    Ok(rows)
}

pub fn write_summary_string(rows: &[SummaryRow]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.sequence.clone()];
        rec.extend(r.cells.iter().map(|c| c.render()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn read_summary(path: &Path, aliases: &ColumnAliases) -> Result<Vec<SummaryRow>> {
    parse_summary(&read_text(path)?, aliases)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    atomic_write(path, write_summary_string(rows).as_bytes())
}

/// Per-sequence records, skipping the aggregate row. Error and missing
/// cells are left out of the record's metric map.
pub fn records_from_summary(rows: &[SummaryRow]) -> Vec<SequenceRecord> {
    rows.iter()
        .filter(|r| !r.is_mean())
        .map(|r| {
            let mut rec = SequenceRecord::new(&r.sequence);
            for (m, c) in MetricKind::ALL.iter().zip(r.cells) {
                if let Some(v) = c.value() {
                    rec.bd.insert(*m, v);
                }
            }
            rec
        })
        .collect()
}

pub const AUX_HEADER: [&str; 3] = ["sequence", "smooth_fraction", "chroma_spread"];

/// Per-sequence frame statistics, `sequence,smooth_fraction[,chroma_spread]`.
pub fn parse_aux(text: &str, aliases: &ColumnAliases) -> Result<BTreeMap<String, AuxStats>> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let idx = aliases.resolve(&header, &AUX_HEADER, &["sequence", "smooth_fraction"])?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let cell = |k: usize| idx[k].and_then(|i| rec.get(i)).unwrap_or("");
        let smooth = parse_num(cell(1), line, "smooth_fraction")?;
        if !(0.0..=1.0).contains(&smooth) {
            return Err(Error::Parse {
                line,
                message: format!("smooth_fraction {smooth} outside [0, 1]"),
            });
        }
        let chroma = match cell(2) {
            "" => None,
            c => Some(parse_num(c, line, "chroma_spread")?),
        };
        let aux = AuxStats {
            smooth_fraction: smooth,
            chroma_spread: chroma,
        };
        if out.insert(cell(0).to_string(), aux).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate sequence '{}'", cell(0)),
            });
        }
    }
    Ok(out)
}

pub fn read_aux(path: &Path, aliases: &ColumnAliases) -> Result<BTreeMap<String, AuxStats>> {
    parse_aux(&read_text(path)?, aliases)
}

pub fn write_aux_string(stats: &[(String, AuxStats)]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(AUX_HEADER).expect("in-memory write");
    for (seq, a) in stats {
        w.write_record([
            seq.clone(),
            fmt_f64(a.smooth_fraction),
            a.chroma_spread.map(fmt_f64).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn write_aux(path: &Path, stats: &[(String, AuxStats)]) -> Result<()> {
    atomic_write(path, write_aux_string(stats).as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PER_QP: &str = "sequence,variant,qp,bitrate_kbps,vmaf,vmaf_neg,psnr_y,ms_ssim\n\
Beauty,baseline,22,101930,92.48,91.2,40.125,0.9912\n\
Beauty,baseline,27,30000.5,90,,38,0.98\n";

    #[test]
    fn aux_round_trip() {
        let text = "sequence,smooth_fraction,chroma_spread\nSRC13,0.81,\nSRC09,0.1,3.5\n";
        let aux = parse_aux(text, &ColumnAliases::default()).unwrap();
        assert_eq!(aux["SRC13"].chroma_spread, None);
        let back: Vec<(String, AuxStats)> = ["SRC13", "SRC09"]
            .iter()
            .map(|s| (s.to_string(), aux[*s]))
            .collect();
        assert_eq!(write_aux_string(&back), text);
        assert!(parse_aux(
            "sequence,smooth_fraction\nA,1.5\n",
            &ColumnAliases::default()
        )
        .is_err());
    }

    #[test]
    fn per_qp_round_trip_is_byte_identical() {
        let rows = parse_per_qp(PER_QP, &ColumnAliases::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(!rows[1].scores.contains_key(&MetricKind::VmafNeg));
        assert_eq!(write_per_qp_string(&rows), PER_QP);
    }

    #[test]
    fn aliases_and_column_order() {
        let text = "Bitrate,QP,Clip,Arm,VMAF-NEG,VMAF\n5000,22,A,baseline,80,85\n";
        let rows = parse_per_qp(text, &ColumnAliases::default()).unwrap();
        assert_eq!(rows[0].sequence, "A");
        assert_eq!(rows[0].bitrate_kbps, 5000.0);
        assert_eq!(rows[0].scores[&MetricKind::VmafNeg], 80.0);
        assert_eq!(rows[0].scores[&MetricKind::Vmaf], 85.0);

        let mut extra = BTreeMap::new();
        extra.insert("Rate (kb/s)".to_string(), "bitrate_kbps".to_string());
        let a = ColumnAliases::default().with(&extra);
        let text = "sequence,variant,qp,Rate (kb/s)\nA,b,22,10\n";
        assert_eq!(parse_per_qp(text, &a).unwrap()[0].bitrate_kbps, 10.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "sequence,variant,qp,bitrate_kbps\nA,b,22,10\nA,b,x,10\n";
        match parse_per_qp(text, &ColumnAliases::default()) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = "sequence,variant,qp,bitrate_kbps\nA,b,22,10\nA,b,22,11\n";
        assert!(matches!(
            parse_per_qp(text, &ColumnAliases::default()),
            Err(Error::Parse { line: 3, .. })
        ));
        let text = "sequence,variant,bitrate_kbps\nA,b,10\n";
        assert!(matches!(
            parse_per_qp(text, &ColumnAliases::default()),
            Err(Error::Parse { line: 1, .. })
        ));
        let text = "sequence,variant,qp,bitrate_kbps\nA,b,22\n";
        assert!(matches!(
            parse_per_qp(text, &ColumnAliases::default()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn summary_round_trip_with_error_and_mean_rows() {
        let text = "sequence,bd_vmaf,bd_vmaf_neg,bd_psnr_y,bd_ms_ssim\n\
A,-39.83,-9.84,39.2,20\n\
B,ERROR,-1.5,,0.1\n\
mean,-39.83,-5.67,39.2,10.05\n";
        let rows = parse_summary(text, &ColumnAliases::default()).unwrap();
        assert!(rows[1].has_error());
        assert_eq!(rows[1].get(MetricKind::PsnrY), Cell::Missing);
        assert!(rows[2].is_mean());
        assert_eq!(write_summary_string(&rows), text);
        let recs = records_from_summary(&rows);
        assert_eq!(recs.len(), 2);
        assert!(!recs[1].bd.contains_key(&MetricKind::Vmaf));
    }

    #[test]
    fn summary_accepts_published_styles() {
        let text = "Sequence,BD-VMAF,BD-VMAF-NEG,BD-PSNR-Y,BD-MS-SSIM\nBeauty,\u{2212}39.83%,-9.84%,+39.20%,+20.00%\n";
        let rows = parse_summary(text, &ColumnAliases::default()).unwrap();
        assert_eq!(rows[0].cells[0], Cell::Value(-39.83));
        assert_eq!(rows[0].cells[2], Cell::Value(39.2));
    }

    #[test]
    fn curves_group_and_sort() {
        let text = "sequence,variant,qp,bitrate_kbps\nA,v,27,5\nA,v,22,10\nA,b,22,12\n";
        let rows = parse_per_qp(text, &ColumnAliases::default()).unwrap();
        let curves = curves_from_rows(&rows);
        assert_eq!(curves.len(), 2);
        assert_eq!(curves[0].variant_id, "v");
        assert_eq!(curves[0].points[0].qp, 22);
        assert_eq!(rows_from_curves(&curves).len(), 3);
    }
}
