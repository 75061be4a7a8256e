use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean;

/// Default margin, in percentage points, both means must clear.
pub const DEFAULT_GAMING_MARGIN: f64 = 5.0;
/// Share of sequences whose VMAF-NEG delta must be positive.
pub const NEG_AGREEMENT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamingVerdict {
    pub flagged: bool,
    pub mean_vmaf: f64,
    pub mean_vmaf_neg: f64,
    pub neg_positive: usize,
    pub n: usize,
    pub margin: f64,
    /// One `+`, `-` or `0` per sequence for the VMAF-NEG delta sign.
    pub neg_sign_pattern: String,
}

/// Flags a VMAF gain that VMAF-NEG rejects: mean VMAF delta ≤ −margin, mean
/// VMAF-NEG delta ≥ +margin, and VMAF-NEG positive on at least 80% of
/// sequences.
pub fn gaming_signature(
    bd_vmaf: &[f64],
    bd_vmaf_neg: &[f64],
    margin: f64,
) -> Result<GamingVerdict> {
    if bd_vmaf.len() != bd_vmaf_neg.len() || bd_vmaf.is_empty() {
        return Err(Error::invalid(format!(
            "need equal non-empty vectors, got {} and {}",
            bd_vmaf.len(),
            bd_vmaf_neg.len()
        )));
    }
    let n = bd_vmaf.len();
    let mean_vmaf = mean(bd_vmaf)?;
    let mean_vmaf_neg = mean(bd_vmaf_neg)?;
    let neg_positive = bd_vmaf_neg.iter().filter(|v| **v > 0.0).count();
    let neg_sign_pattern = bd_vmaf_neg
        .iter()
        .map(|v| match v.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => '+',
            Some(std::cmp::Ordering::Less) => '-',
            _ => '0',
        })
        .collect();
    let flagged = mean_vmaf <= -margin
        && mean_vmaf_neg >= margin
        && neg_positive as f64 >= NEG_AGREEMENT * n as f64;
    Ok(GamingVerdict {
        flagged,
        mean_vmaf,
        mean_vmaf_neg,
        neg_positive,
        n,
        margin,
        neg_sign_pattern,
    })
}
