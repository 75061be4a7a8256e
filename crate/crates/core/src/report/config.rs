//! Run configuration (TOML).
//!
//! ```toml
//! [tools]
//! ffmpeg = "/opt/ffmpeg/bin/ffmpeg"
//!
//! [harness]
//! qps = [22, 27, 32, 37]
//! workers = 8
//! cache_dir = ".rdbench-cache"
//! keep_intermediates = false
//!
//! [rate_proxy.qp_to_quality]
//! qp_low = 18
//! quality_at_qp_low = 75
//! qp_high = 40
//! quality_at_qp_high = 10
//!
//! [analytics]
//! regression_pp = 10.0
//! smooth_fraction = 0.5
//! saturation_quality = 98.0
//! disagreement_pp = 25.0
//! smooth_variance = 4.0
//! gaming_margin = 5.0
//!
//! [[slices]]
//! name = "excl-regressions"
//! exclude = ["videoSRC09", "videoSRC13"]
//!
//! [aliases]
//! "BD rate (VMAF)" = "bd_vmaf"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{SliceSpec, Thresholds, DEFAULT_GAMING_MARGIN, DEFAULT_SMOOTH_VARIANCE};
use crate::error::{Error, Result};
use crate::rate_proxy::QpQualityMap;
use crate::types::CANONICAL_QPS;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolsConfig {
    pub ffmpeg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub qps: Vec<u32>,
    pub workers: Option<usize>,
    pub cache_dir: PathBuf,
    pub keep_intermediates: bool,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            qps: CANONICAL_QPS.to_vec(),
            workers: None,
            cache_dir: PathBuf::from(".rdbench-cache"),
            keep_intermediates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateProxyConfig {
    pub qp_to_quality: QpQualityMap,
    pub patch_size: u32,
    pub patches: usize,
    pub seed: u64,
}

impl Default for RateProxyConfig {
    fn default() -> Self {
        RateProxyConfig {
            qp_to_quality: QpQualityMap::default(),
            patch_size: 256,
            patches: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsConfig {
    #[serde(flatten)]
    pub thresholds: Thresholds,
    pub smooth_variance: f64,
    pub gaming_margin: f64,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            thresholds: Thresholds::default(),
            smooth_variance: DEFAULT_SMOOTH_VARIANCE,
            gaming_margin: DEFAULT_GAMING_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub tools: ToolsConfig,
    pub harness: HarnessConfig,
    pub rate_proxy: RateProxyConfig,
    pub analytics: AnalyticsConfig,
    pub slices: Vec<SliceSpec>,
    pub aliases: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.harness.qps.is_empty() {
            return Err(Error::Config("harness.qps is empty".into()));
        }
        let mut qps = self.harness.qps.clone();
        qps.sort_unstable();
        qps.dedup();
        if qps.len() != self.harness.qps.len() {
            return Err(Error::Config("harness.qps has duplicates".into()));
        }
        if self.harness.workers == Some(0) {
            return Err(Error::Config("harness.workers must be at least 1".into()));
        }
        self.rate_proxy.qp_to_quality.validate()?;
        if self.rate_proxy.patch_size == 0 || self.rate_proxy.patch_size % 16 != 0 {
            return Err(Error::Config(
                "rate_proxy.patch_size must be a positive multiple of 16".into(),
            ));
        }
        for (i, s) in self.slices.iter().enumerate() {
            if s.name.is_empty() {
                return Err(Error::Config(format!("slice #{i} has no name")));
            }
            if self.slices[..i].iter().any(|t| t.name == s.name) {
                return Err(Error::Config(format!("duplicate slice name '{}'", s.name)));
            }
        }
        let t = &self.analytics.thresholds;
        if !(0.0..=1.0).contains(&t.smooth_fraction) {
            return Err(Error::Config(
                "analytics.smooth_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// True when the QP grid is the canonical four-point one.
    pub fn is_canonical_grid(&self) -> bool {
        self.harness.qps == CANONICAL_QPS
    }
}

/// Parses `name=ID,ID;name2=ID` into slice specs. An empty right-hand side
/// means no exclusions.
pub fn parse_slice_list(spec: &str) -> Result<Vec<SliceSpec>> {
    let mut out: Vec<SliceSpec> = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, ids) = part.split_once('=').unwrap_or((part, ""));
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Config(format!("slice without a name in '{part}'")));
        }
        if out.iter().any(|s| s.name == name) {
            return Err(Error::Config(format!("duplicate slice name '{name}'")));
        }
        out.push(SliceSpec {
            name: name.to_string(),
            exclude: ids
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
        });
    }
    if out.is_empty() {
        return Err(Error::Config("empty slice specification".into()));
    }
    Ok(out)
}

/// Slices from a TOML file holding `[[slices]]` tables.
pub fn load_slice_file(path: &Path) -> Result<Vec<SliceSpec>> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct File {
        slices: Vec<SliceSpec>,
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    let f: File =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if f.slices.is_empty() {
        return Err(Error::Config(format!("{}: no slices", path.display())));
    }
    Ok(f.slices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let c = Config::parse("").unwrap();
        assert!(c.is_canonical_grid());
        assert_eq!(c.analytics.thresholds, Thresholds::default());
        assert_eq!(c.rate_proxy.qp_to_quality, QpQualityMap::default());
    }

    #[test]
    fn full_file() {
        let text = r#"
[tools]
ffmpeg = "/opt/ff"
[harness]
qps = [20, 30]
workers = 2
[rate_proxy.qp_to_quality]
qp_low = 18
quality_at_qp_low = 80
qp_high = 40
quality_at_qp_high = 5
[analytics]
regression_pp = 15.0
smooth_variance = 9.0
[[slices]]
name = "all"
[[slices]]
name = "excl"
exclude = ["a", "b"]
[aliases]
"Rate" = "bitrate_kbps"
"#;
        let c = Config::parse(text).unwrap();
        assert_eq!(c.tools.ffmpeg.as_deref(), Some(Path::new("/opt/ff")));
        assert!(!c.is_canonical_grid());
        assert_eq!(c.analytics.thresholds.regression_pp, 15.0);
        assert_eq!(c.analytics.thresholds.smooth_fraction, 0.5);
        assert_eq!(c.analytics.smooth_variance, 9.0);
        assert_eq!(c.slices[1].exclude, ["a", "b"]);
        assert_eq!(c.aliases["Rate"], "bitrate_kbps");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::parse("[harness]\nqps = []").is_err());
        assert!(Config::parse("[harness]\nqps = [22, 22]").is_err());
        assert!(Config::parse("[harness]\nworkers = 0").is_err());
        assert!(Config::parse("[harness]\nqpz = [1]").is_err());
        assert!(Config::parse(
            "[rate_proxy.qp_to_quality]\nqp_low=18\nquality_at_qp_low=10\nqp_high=40\nquality_at_qp_high=75"
        )
        .is_err());
        assert!(Config::parse("[[slices]]\nname='a'\n[[slices]]\nname='a'").is_err());
    }

    #[test]
    fn inline_slices() {
        let s = parse_slice_list("all; excl=SRC09, SRC13 ;three=SRC09,SRC13,SRC29").unwrap();
        assert_eq!(s.len(), 3);
        assert!(s[0].exclude.is_empty());
        assert_eq!(s[1].exclude, ["SRC09", "SRC13"]);
        assert!(parse_slice_list(" ; ").is_err());
        assert!(parse_slice_list("a;a").is_err());
    }
}
