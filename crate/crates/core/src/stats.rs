//! Elementary statistics: rank and product-moment correlation, least squares,
//! and descriptive summaries.
//!
//! All sums go through [`compensated_sum`] so that results do not depend on
//! the order in which measurements were collected.

use crate::error::{Error, Result};
use crate::types::CorrelationReport;

/// Neumaier-compensated summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::invalid("mean of empty input"));
    }
    Ok(compensated_sum(xs.iter().copied()) / xs.len() as f64)
}

/// Population standard deviation (divides by n).
pub fn population_std(xs: &[f64]) -> Result<f64> {
    let m = mean(xs)?;
    let ss = compensated_sum(xs.iter().map(|x| (x - m) * (x - m)));
    Ok((ss / xs.len() as f64).sqrt())
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::invalid("median of empty input"));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN in input"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Median, averaging the two middle values for even n.
pub fn median(xs: &[f64]) -> Result<f64> {
    let v = sorted(xs)?;
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Lower-middle median: for even n, the smaller of the two middle values.
pub fn lower_median(xs: &[f64]) -> Result<f64> {
    let v = sorted(xs)?;
    Ok(v[(v.len() - 1) / 2])
}

fn check_pair(xs: &[f64], ys: &[f64], min: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < min {
        return Err(Error::invalid(format!(
            "need at least {min} samples, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    Ok(())
}

/// Ranks starting at 1; tied values share the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean of (i+1..=j)
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson_unchecked(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let syy = compensated_sum(ys.iter().map(|y| (y - my) * (y - my)));
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys, 2)?;
    pearson_unchecked(xs, ys)
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys, 2)?;
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson_unchecked(&rx, &ry).map_err(|_| Error::UndefinedCorrelation("zero rank variance"))
}

/// Least-squares line through `(xs, ys)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> Result<AffineFit> {
    check_pair(xs, ys, 2)?;
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("zero variance in x"));
    }
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    Ok(AffineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Mean absolute residual of `ys` against `slope·x + intercept`.
pub fn mae_after_affine(xs: &[f64], ys: &[f64], slope: f64, intercept: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::invalid("empty input"));
    }
    check_pair(xs, ys, 1)?;
    let total = compensated_sum(
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (y - (slope * x + intercept)).abs()),
    );
    Ok(total / xs.len() as f64)
}

/// Coefficient of determination of a fit.
pub fn r_squared(xs: &[f64], ys: &[f64], fit: AffineFit) -> Result<f64> {
    check_pair(xs, ys, 2)?;
    let my = mean(ys)?;
    let ss_tot = compensated_sum(ys.iter().map(|y| (y - my) * (y - my)));
    if ss_tot == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance in y"));
    }
    let ss_res = compensated_sum(
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (y - fit.predict(*x)) * (y - fit.predict(*x))),
    );
    Ok(1.0 - ss_res / ss_tot)
}

/// Fit plus pooled Spearman, Pearson and MAE in one pass.
pub fn correlation_report(
    predictor: &[f64],
    target: &[f64],
) -> Result<(AffineFit, CorrelationReport)> {
    let fit = affine_fit(predictor, target)?;
    let report = CorrelationReport {
        spearman_rho: spearman(predictor, target)?,
        pearson_r: pearson(predictor, target)?,
        mae: mae_after_affine(predictor, target, fit.slope, fit.intercept)?,
        n: predictor.len(),
    };
    Ok((fit, report))
}
