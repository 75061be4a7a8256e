//! Rate-distortion benchmarking toolkit: Bjøntegaard-delta analytics, a
//! DCT-domain rate proxy with affine calibration, a deterministic
//! encode/score harness, failure-mode classification and report emission.

pub mod analytics;
pub mod bd;
pub mod error;
pub mod fsutil;
pub mod harness;
pub mod pool;
pub mod rate_proxy;
pub mod report;
pub mod stats;
pub mod types;
pub mod yuv;

pub use error::{Error, Result};
pub use types::{CorrelationReport, MetricKind, RDCurve, RDPoint, CANONICAL_QPS};
pub use yuv::{Geometry, YuvPatch};
