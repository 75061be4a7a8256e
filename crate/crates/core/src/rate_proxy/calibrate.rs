use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{measure_real_bpp, rate_score_with, ExtractedPatch, PatchEncoder, QpQualityMap};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::pool::parallel_map;
use crate::stats::{affine_fit, mae_after_affine, pearson, spearman};
use crate::types::CorrelationReport;

/// One (patch, QP) pairing of proxy score and real encoder cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMeasurement {
    pub patch_id: String,
    pub qp: u32,
    pub proxy_raw: f64,
    pub real_bpp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pooled over every measurement.
    pub report: CorrelationReport,
    /// Spearman across patches within each QP column. QPs where the statistic
    /// is undefined (fewer than two patches, or constant values) are absent.
    pub per_qp_rho: BTreeMap<u32, f64>,
    /// Share of patches whose proxy strictly increases as QP decreases.
    pub monotone_fraction: f64,
    pub patches: usize,
    /// Patches measured at fewer than two QPs; left out of `monotone_fraction`.
    pub excluded_patches: Vec<String>,
}

/// Fits real bpp against the proxy and reports rank agreement.
pub fn calibrate(measurements: &[RateMeasurement]) -> Result<CalibrationFit> {
    for m in measurements {
        if !(m.real_bpp.is_finite() && m.real_bpp > 0.0) {
            return Err(Error::invalid(format!(
                "{} qp {}: real_bpp must be positive, got {}",
                m.patch_id, m.qp, m.real_bpp
            )));
        }
        if !(m.proxy_raw.is_finite() && m.proxy_raw >= 0.0) {
            return Err(Error::invalid(format!(
                "{} qp {}: proxy_raw must be non-negative, got {}",
                m.patch_id, m.qp, m.proxy_raw
            )));
        }
    }

    let mut by_patch: BTreeMap<&str, BTreeMap<u32, f64>> = BTreeMap::new();
    for m in measurements {
        if by_patch
            .entry(&m.patch_id)
            .or_default()
            .insert(m.qp, m.proxy_raw)
            .is_some()
        {
            return Err(Error::invalid(format!(
                "duplicate measurement for {} at qp {}",
                m.patch_id, m.qp
            )));
        }
    }
    if by_patch.len() < 2 {
        return Err(Error::invalid(format!(
            "calibration needs at least 2 distinct patches, got {}",
            by_patch.len()
        )));
    }

    let xs: Vec<f64> = measurements.iter().map(|m| m.proxy_raw).collect();
    let ys: Vec<f64> = measurements.iter().map(|m| m.real_bpp).collect();
    let fit = affine_fit(&xs, &ys)?;
    let report = CorrelationReport {
        spearman_rho: spearman(&xs, &ys)?,
        pearson_r: pearson(&xs, &ys)?,
        mae: mae_after_affine(&xs, &ys, fit.slope, fit.intercept)?,
        n: measurements.len(),
    };

    let mut columns: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for m in measurements {
        let col = columns.entry(m.qp).or_default();
        col.0.push(m.proxy_raw);
        col.1.push(m.real_bpp);
    }
    let per_qp_rho = columns
        .into_iter()
        .filter_map(|(qp, (p, r))| spearman(&p, &r).ok().map(|rho| (qp, rho)))
        .collect();

    let mut excluded = Vec::new();
    let mut monotone = 0usize;
    let mut eligible = 0usize;
    for (id, series) in &by_patch {
        if series.len() < 2 {
            excluded.push((*id).to_string());
            continue;
        }
        eligible += 1;
        // ascending qp: proxy must strictly decrease
        let vals: Vec<f64> = series.values().copied().collect();
        if vals.windows(2).all(|w| w[0] > w[1]) {
            monotone += 1;
        }
    }
    if eligible == 0 {
        return Err(Error::invalid(
            "no patch has measurements at two or more QPs; monotone fraction undefined",
        ));
    }

    Ok(CalibrationFit {
        slope: fit.slope,
        intercept: fit.intercept,
        report,
        per_qp_rho,
        monotone_fraction: monotone as f64 / eligible as f64,
        patches: by_patch.len(),
        excluded_patches: excluded,
    })
}

/// Scores and encodes every (patch, qp) pair on `workers` threads. Output
/// order is patch-major, then `qps` order, regardless of scheduling.
pub fn run_calibration(
    patches: &[ExtractedPatch],
    qps: &[u32],
    map: &QpQualityMap,
    encoder: &dyn PatchEncoder,
    workers: usize,
) -> Result<Vec<RateMeasurement>> {
    let jobs: Vec<(usize, u32)> = (0..patches.len())
        .flat_map(|p| qps.iter().map(move |&qp| (p, qp)))
        .collect();
    parallel_map(&jobs, workers, |&(p, qp)| {
        let patch = &patches[p];
        Ok(RateMeasurement {
            patch_id: patch.id.clone(),
            qp,
            proxy_raw: rate_score_with(&patch.patch, qp, map)?,
            real_bpp: measure_real_bpp(&patch.patch, qp, encoder)?,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_measurements_csv(path: &Path, rows: &[RateMeasurement]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    atomic_write(path, &bytes)
}

pub fn read_measurements_csv(path: &Path) -> Result<Vec<RateMeasurement>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Fit summary: `slope,intercept,spearman,pearson,mae,per_qp_rho_<qp>...,monotone_fraction`.
pub fn write_fit_csv(path: &Path, fit: &CalibrationFit) -> Result<()> {
    let mut out = Vec::new();
    let mut header = vec![
        "slope".to_string(),
        "intercept".into(),
        "spearman".into(),
        "pearson".into(),
        "mae".into(),
    ];
    header.extend(fit.per_qp_rho.keys().map(|qp| format!("per_qp_rho_{qp}")));
    header.push("monotone_fraction".into());
    let mut values = vec![
        fit.slope,
        fit.intercept,
        fit.report.spearman_rho,
        fit.report.pearson_r,
        fit.report.mae,
    ];
    values.extend(fit.per_qp_rho.values());
    values.push(fit.monotone_fraction);
    writeln!(out, "{}", header.join(",")).unwrap();
    let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    writeln!(out, "{}", vals.join(",")).unwrap();
    atomic_write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(id: &str, qp: u32, proxy: f64, bpp: f64) -> RateMeasurement {
        RateMeasurement {
            patch_id: id.into(),
            qp,
            proxy_raw: proxy,
            real_bpp: bpp,
        }
    }

    fn on_line(n: usize) -> Vec<RateMeasurement> {
        let mut v = Vec::new();
        for p in 0..n {
            for (k, qp) in [22, 27, 32, 37].into_iter().enumerate() {
                let proxy = 0.1 + 0.02 * p as f64 + 0.05 * (3 - k) as f64;
                v.push(m(&format!("p{p}"), qp, proxy, 7.677 * proxy - 0.282));
            }
        }
        v
    }

    #[test]
    fn exact_line_is_recovered() {
        let fit = calibrate(&on_line(10)).unwrap();
        assert_abs_diff_eq!(fit.slope, 7.677, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.intercept, -0.282, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.report.mae, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.report.spearman_rho, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.report.pearson_r, 1.0, epsilon = 1e-12);
        assert_eq!(fit.monotone_fraction, 1.0);
        assert_eq!(fit.per_qp_rho.len(), 4);
        assert!(fit.per_qp_rho.values().all(|r| (r - 1.0).abs() < 1e-12));
        assert_eq!(fit.report.n, 40);
    }

    #[test]
    fn single_qp_patches_are_excluded_and_counted() {
        let mut v = on_line(3);
        v.push(m("lonely", 22, 0.5, 3.0));
        let fit = calibrate(&v).unwrap();
        assert_eq!(fit.excluded_patches, vec!["lonely".to_string()]);
        assert_eq!(fit.patches, 4);
        assert_eq!(fit.monotone_fraction, 1.0);
    }

    #[test]
    fn non_monotone_patch_lowers_fraction() {
        let mut v = on_line(4);
        // make p0's qp 27 proxy equal to its qp 32 proxy
        let p32 = v
            .iter()
            .find(|x| x.patch_id == "p0" && x.qp == 32)
            .unwrap()
            .proxy_raw;
        v.iter_mut()
            .find(|x| x.patch_id == "p0" && x.qp == 27)
            .unwrap()
            .proxy_raw = p32;
        assert_eq!(calibrate(&v).unwrap().monotone_fraction, 0.75);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(calibrate(&on_line(1)).is_err());
        let mut v = on_line(2);
        v[0].real_bpp = 0.0;
        assert!(calibrate(&v).is_err());
        let mut v = on_line(2);
        v.push(v[0].clone());
        assert!(calibrate(&v).is_err());
        let v = vec![m("a", 22, 0.1, 1.0), m("b", 22, 0.2, 2.0)];
        assert!(calibrate(&v).is_err());
    }

    #[test]
    fn spearman_matches_pooled_rank_oracle() {
        // proxy ranks perturbed by swapping neighbours
        let mut v = Vec::new();
        let bpp = [0.9, 0.5, 0.3, 0.1, 1.1, 0.6, 0.35, 0.12];
        let proxy = [0.8, 0.55, 0.25, 0.11, 1.0, 0.5, 0.3, 0.12];
        for (i, (b, p)) in bpp.iter().zip(proxy).enumerate() {
            let id = if i < 4 { "a" } else { "b" };
            v.push(m(id, [22, 27, 32, 37][i % 4], p, *b));
        }
        let rb = crate::stats::average_ranks(&bpp);
        let rp = crate::stats::average_ranks(&proxy);
        let n = rb.len() as f64;
        let d2: f64 = rb.iter().zip(&rp).map(|(a, b)| (a - b) * (a - b)).sum();
        let oracle = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        let fit = calibrate(&v).unwrap();
        assert_abs_diff_eq!(fit.report.spearman_rho, oracle, epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let v = on_line(2);
        write_measurements_csv(&p, &v).unwrap();
        assert_eq!(read_measurements_csv(&p).unwrap(), v);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("patch_id,qp,proxy_raw,real_bpp\n"));

        let f = dir.path().join("fit.csv");
        write_fit_csv(&f, &calibrate(&on_line(3)).unwrap()).unwrap();
        let text = std::fs::read_to_string(&f).unwrap();
        assert!(text.starts_with(
            "slope,intercept,spearman,pearson,mae,per_qp_rho_22,per_qp_rho_27,per_qp_rho_32,per_qp_rho_37,monotone_fraction\n"
        ));
    }
}
