//! Bjøntegaard-delta analytics over RD curves.
//!
//! BD-rate fits `log10(bitrate)` as a monotone cubic function of quality for
//! each curve and averages the gap over the shared quality interval:
//!
//! ```text
//! D  = 1/(hi - lo) * ∫[lo, hi] (logR_variant(q) - logR_baseline(q)) dq
//! BD = (10^D - 1) * 100
//! ```
//!
//! BD-quality swaps the axes and reports the mean quality gap over the shared
//! log-rate interval. Neither direction ever extrapolates: an empty overlap
//! is an error.

mod pchip;
mod quad;

pub use pchip::{pchip_fit, Interpolant};
pub use quad::adaptive_simpson;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{MetricKind, RDCurve, RDPoint};

/// Adjacent samples closer than this on the abscissa are merged.
pub const MERGE_EPSILON: f64 = 1e-6;

/// Absolute tolerance on the mean-log integrand.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdOptions {
    pub tolerance: f64,
    pub merge_epsilon: f64,
}

impl Default for BdOptions {
    fn default() -> Self {
        BdOptions {
            tolerance: DEFAULT_TOLERANCE,
            merge_epsilon: MERGE_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BDResult {
    pub metric: MetricKind,
    /// Negative means the variant saves bits at matched quality.
    pub bd_rate_percent: f64,
    pub quality_lo: f64,
    pub quality_hi: f64,
    /// Points dropped by saturation merging, summed over both curves. A
    /// non-zero value marks a preprocessing-affected result.
    pub merged_points: usize,
}

/// Curve samples reduced to a strictly increasing abscissa.
struct Prepared {
    xs: Vec<f64>,
    ys: Vec<f64>,
    merged: usize,
}

fn score_of(curve: &RDCurve, p: &RDPoint, metric: MetricKind) -> Result<f64> {
    let s = p.score(metric).ok_or_else(|| {
        Error::invalid(format!(
            "{}/{} qp {}: missing {} score",
            curve.sequence_id, curve.variant_id, p.qp, metric
        ))
    })?;
    if !s.is_finite() {
        return Err(Error::invalid(format!(
            "{}/{} qp {}: non-finite {} score",
            curve.sequence_id, curve.variant_id, p.qp, metric
        )));
    }
    Ok(s)
}

fn check_curve(curve: &RDCurve) -> Result<()> {
    if curve.points.len() < 2 {
        return Err(Error::invalid(format!(
            "{}/{}: BD needs at least 2 points, got {}",
            curve.sequence_id,
            curve.variant_id,
            curve.points.len()
        )));
    }
    if let Some(p) = curve
        .points
        .iter()
        .find(|p| !(p.bitrate_kbps.is_finite() && p.bitrate_kbps > 0.0))
    {
        return Err(Error::invalid(format!(
            "{}/{} qp {}: bitrate must be positive, got {}",
            curve.sequence_id, curve.variant_id, p.qp, p.bitrate_kbps
        )));
    }
    Ok(())
}

/// Sorts `(x, y)` by x and collapses runs closer than `eps`, keeping the
/// member preferred by `keep_second`.
fn sort_and_merge(
    mut samples: Vec<(f64, f64)>,
    eps: f64,
    keep_second: impl Fn(&(f64, f64), &(f64, f64)) -> bool,
) -> Prepared {
    samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
    let mut merged = 0;
    for s in samples {
        match kept.last_mut() {
            Some(last) if (s.0 - last.0).abs() < eps => {
                merged += 1;
                if keep_second(last, &s) {
                    *last = s;
                }
            }
            _ => kept.push(s),
        }
    }
    Prepared {
        xs: kept.iter().map(|s| s.0).collect(),
        ys: kept.iter().map(|s| s.1).collect(),
        merged,
    }
}

/// (quality, log10 rate) with saturated duplicates collapsed onto the
/// lower-bitrate sample.
fn prepare_rate_axis(curve: &RDCurve, metric: MetricKind, eps: f64) -> Result<Prepared> {
    check_curve(curve)?;
    let samples = curve
        .points
        .iter()
        .map(|p| Ok((score_of(curve, p, metric)?, p.bitrate_kbps.log10())))
        .collect::<Result<Vec<_>>>()?;
    let prep = sort_and_merge(samples, eps, |kept, new| new.1 < kept.1);
    if prep.xs.len() < 2 {
        return Err(Error::DegenerateCurve(format!(
            "{}/{}: {} collapses to a single distinct value after merging",
            curve.sequence_id, curve.variant_id, metric
        )));
    }
    Ok(prep)
}

/// (log10 rate, quality); equal rates keep the higher quality.
fn prepare_quality_axis(curve: &RDCurve, metric: MetricKind, eps: f64) -> Result<Prepared> {
    check_curve(curve)?;
    let samples = curve
        .points
        .iter()
        .map(|p| Ok((p.bitrate_kbps.log10(), score_of(curve, p, metric)?)))
        .collect::<Result<Vec<_>>>()?;
    let prep = sort_and_merge(samples, eps, |kept, new| new.1 > kept.1);
    if prep.xs.len() < 2 {
        return Err(Error::DegenerateCurve(format!(
            "{}/{}: bitrates collapse to a single distinct value",
            curve.sequence_id, curve.variant_id
        )));
    }
    Ok(prep)
}

struct Overlap {
    lo: f64,
    hi: f64,
}

fn overlap(a: &Prepared, b: &Prepared) -> Result<Overlap> {
    let (alo, ahi) = (a.xs[0], *a.xs.last().unwrap());
    let (blo, bhi) = (b.xs[0], *b.xs.last().unwrap());
    let lo = alo.max(blo);
    let hi = ahi.min(bhi);
    if lo >= hi {
        return Err(Error::NoOverlap {
            baseline_lo: alo,
            baseline_hi: ahi,
            variant_lo: blo,
            variant_hi: bhi,
        });
    }
    Ok(Overlap { lo, hi })
}

/// Mean of `variant(x) - baseline(x)` over the shared abscissa range.
fn mean_gap(base: &Prepared, var: &Prepared, tol: f64) -> Result<(f64, Overlap)> {
    let ov = overlap(base, var)?;
    let pb = pchip_fit(&base.xs, &base.ys)?;
    let pv = pchip_fit(&var.xs, &var.ys)?;
    let mut breaks: Vec<f64> = base.xs.iter().chain(&var.xs).copied().collect();
    breaks.sort_by(f64::total_cmp);
    let width = ov.hi - ov.lo;
    let integral = adaptive_simpson(
        |x| pv.eval(x) - pb.eval(x),
        ov.lo,
        ov.hi,
        tol * width,
        &breaks,
    );
    Ok((integral / width, ov))
}

/// BD-rate of `variant` against `baseline` under `metric`, in percent.
pub fn bd_rate(baseline: &RDCurve, variant: &RDCurve, metric: MetricKind) -> Result<BDResult> {
    bd_rate_with(baseline, variant, metric, BdOptions::default())
}

pub fn bd_rate_with(
    baseline: &RDCurve,
    variant: &RDCurve,
    metric: MetricKind,
    opts: BdOptions,
) -> Result<BDResult> {
    let base = prepare_rate_axis(baseline, metric, opts.merge_epsilon)?;
    let var = prepare_rate_axis(variant, metric, opts.merge_epsilon)?;
    let (d, ov) = mean_gap(&base, &var, opts.tolerance)?;
    Ok(BDResult {
        metric,
        bd_rate_percent: (10f64.powf(d) - 1.0) * 100.0,
        quality_lo: ov.lo,
        quality_hi: ov.hi,
        merged_points: base.merged + var.merged,
    })
}

/// BD-quality: mean metric gain of `variant` at matched bitrate, in metric
/// units. Positive means quality gained.
pub fn bd_quality(baseline: &RDCurve, variant: &RDCurve, metric: MetricKind) -> Result<f64> {
    bd_quality_with(baseline, variant, metric, BdOptions::default())
}

pub fn bd_quality_with(
    baseline: &RDCurve,
    variant: &RDCurve,
    metric: MetricKind,
    opts: BdOptions,
) -> Result<f64> {
    let base = prepare_quality_axis(baseline, metric, opts.merge_epsilon)?;
    let var = prepare_quality_axis(variant, metric, opts.merge_epsilon)?;
    Ok(mean_gap(&base, &var, opts.tolerance)?.0)
}

/// Bitrate saved by `variant` relative to `baseline` at a single operating
/// point, in percent.
pub fn operating_point_saving(baseline: &RDPoint, variant: &RDPoint) -> Result<f64> {
    if !(baseline.bitrate_kbps > 0.0 && variant.bitrate_kbps > 0.0) {
        return Err(Error::invalid("operating point bitrates must be positive"));
    }
    Ok((1.0 - variant.bitrate_kbps / baseline.bitrate_kbps) * 100.0)
}
