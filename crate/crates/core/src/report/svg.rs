//! Static SVG charts. Output depends only on the inputs: fixed ordering,
//! fixed number formatting, no timestamps.

use std::fmt::Write as _;

use crate::bd::pchip_fit;
use crate::types::{MetricKind, RDCurve};

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn f(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Evenly spaced "nice" tick values covering [lo, hi].
fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-9);
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize + 1
    };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Bitrate ticks on a log axis: decades, plus 2× and 5× when the range spans
/// under two decades.
fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let fine = hi - lo < 2.0;
    for e in lo.floor() as i32..=hi.ceil() as i32 {
        for m in [1.0, 2.0, 5.0] {
            if m != 1.0 && !fine {
                continue;
            }
            let v = f64::log10(m) + e as f64;
            if v >= lo - 1e-12 && v <= hi + 1e-12 {
                out.push(v);
            }
        }
    }
    out
}

fn kbps_label(log_v: f64) -> String {
    let v = 10f64.powf(log_v);
    if v >= 1000.0 {
        let m = v / 1000.0;
        if (m - m.round()).abs() < 1e-9 {
            format!("{}M", m.round() as i64)
        } else {
            format!("{m:.1}M")
        }
    } else if (v - v.round()).abs() < 1e-9 {
        format!("{}k", v.round() as i64)
    } else {
        format!("{v:.1}k")
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn padded(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let px = ((x1 - x0) * 0.05).max(0.02);
        let py = ((y1 - y0) * 0.05).max(0.05);
        Frame {
            x0: x0 - px,
            x1: x1 + px,
            y0: y0 - py,
            y1: y1 + py,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        f((W - RIGHT + LEFT) / 2.0),
        esc(title)
    )
    .unwrap();
}

fn axes(
    out: &mut String,
    fr: &Frame,
    xticks: &[(f64, String)],
    yticks: &[(f64, String)],
    xlabel: &str,
    ylabel: &str,
) {
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        f(l),
        f(t),
        f(r - l),
        f(b - t)
    )
    .unwrap();
    for (v, lab) in xticks {
        let x = f(fr.sx(*v));
        writeln!(
            out,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#ddd"/>"##,
            f(t),
            f(b)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            f(b + 16.0),
            esc(lab)
        )
        .unwrap();
    }
    for (v, lab) in yticks {
        let y = f(fr.sy(*v));
        writeln!(
            out,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
            f(l),
            f(r)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{y}" text-anchor="end" dy="4">{}</text>"#,
            f(l - 6.0),
            esc(lab)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        f((l + r) / 2.0),
        f(H - 14.0),
        esc(xlabel)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        f((t + b) / 2.0),
        f((t + b) / 2.0),
        esc(ylabel)
    )
    .unwrap();
}

/// (log10 bitrate, score) pairs of a curve with a score for `metric`.
fn samples(c: &RDCurve, metric: MetricKind) -> Vec<(f64, f64)> {
    c.points
        .iter()
        .filter(|p| p.bitrate_kbps > 0.0)
        .filter_map(|p| p.score(metric).map(|q| (p.bitrate_kbps.log10(), q)))
        .collect()
}

/// Dense polyline through the samples: a monotone cubic over ascending
/// log-rate, or straight segments if the abscissae repeat.
fn curve_path(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut s = pts.to_vec();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = s.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = s.iter().map(|p| p.1).collect();
    match pchip_fit(&xs, &ys) {
        Ok(ip) => {
            let (a, b) = ip.span();
            let n = 48;
            (0..=n)
                .map(|i| {
                    let x = a + (b - a) * i as f64 / n as f64;
                    (x, ip.eval(x))
                })
                .collect()
        }
        Err(_) => s,
    }
}

fn marker(out: &mut String, shape: usize, x: f64, y: f64, color: &str, filled: bool) {
    let fill = if filled { color } else { "white" };
    let (x, y) = (f(x), f(y));
    match shape % 4 {
        0 => writeln!(out, r#"<circle cx="{x}" cy="{y}" r="4" fill="{fill}" stroke="{color}" stroke-width="1.5"/>"#),
        1 => writeln!(
            out,
            r#"<rect x="{}" y="{}" width="8" height="8" fill="{fill}" stroke="{color}" stroke-width="1.5" transform="translate(-4 -4)"/>"#,
            x, y
        ),
        2 => writeln!(
            out,
            r#"<path d="M 0 -5 L 4.5 3.5 L -4.5 3.5 Z" transform="translate({x} {y})" fill="{fill}" stroke="{color}" stroke-width="1.5"/>"#
        ),
        _ => writeln!(
            out,
            r#"<path d="M 0 -5 L 5 0 L 0 5 L -5 0 Z" transform="translate({x} {y})" fill="{fill}" stroke="{color}" stroke-width="1.5"/>"#
        ),
    }
    .unwrap();
}

/// RD chart of every curve in `curves` for `metric`: baseline curves dashed
/// with open markers, other variants solid with filled markers. Colour
/// follows the sequence, marker shape the variant.
pub fn rd_plot(curves: &[RDCurve], metric: MetricKind, baseline: &str, title: &str) -> String {
    let mut sequences: Vec<&str> = Vec::new();
    let mut variants: Vec<&str> = Vec::new();
    for c in curves {
        if !sequences.contains(&c.sequence_id.as_str()) {
            sequences.push(&c.sequence_id);
        }
        if c.variant_id != baseline && !variants.contains(&c.variant_id.as_str()) {
            variants.push(&c.variant_id);
        }
    }
    let all: Vec<(f64, f64)> = curves.iter().flat_map(|c| samples(c, metric)).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (2.0, 4.0, 0.0, 1.0);
    }
    let fr = Frame::padded(x0, x1, y0, y1);

    let mut out = String::new();
    header(&mut out, title);
    let xt: Vec<(f64, String)> = log_ticks(fr.x0, fr.x1)
        .into_iter()
        .map(|v| (v, kbps_label(v)))
        .collect();
    let yv = nice_ticks(fr.y0, fr.y1, 6);
    let ystep = if yv.len() > 1 { yv[1] - yv[0] } else { 1.0 };
    let yt: Vec<(f64, String)> = yv.iter().map(|&v| (v, tick_label(v, ystep))).collect();
    axes(
        &mut out,
        &fr,
        &xt,
        &yt,
        "bitrate (kbps, log scale)",
        metric.label(),
    );

    for c in curves {
        let pts = samples(c, metric);
        if pts.is_empty() {
            continue;
        }
        let si = sequences.iter().position(|s| *s == c.sequence_id).unwrap();
        let color = PALETTE[si % PALETTE.len()];
        let is_base = c.variant_id == baseline;
        let shape = if is_base {
            0
        } else {
            variants.iter().position(|v| *v == c.variant_id).unwrap()
        };
        let path: Vec<String> = curve_path(&pts)
            .iter()
            .map(|&(x, y)| format!("{},{}", f(fr.sx(x)), f(fr.sy(y))))
            .collect();
        let dash = if is_base {
            r#" stroke-dasharray="5 3""#
        } else {
            ""
        };
        writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            path.join(" ")
        )
        .unwrap();
        for &(x, y) in &pts {
            marker(&mut out, shape, fr.sx(x), fr.sy(y), color, !is_base);
        }
    }

    let lx = W - RIGHT + 14.0;
    let mut ly = TOP + 8.0;
    for (i, s) in sequences.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        writeln!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="3"/>"#,
            f(lx),
            f(ly),
            f(lx + 18.0),
            f(ly)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" dy="4">{}</text>"#,
            f(lx + 24.0),
            f(ly),
            esc(s)
        )
        .unwrap();
        ly += 18.0;
    }
    ly += 8.0;
    marker(&mut out, 0, lx + 9.0, ly, "#333", false);
    writeln!(
        out,
        r#"<text x="{}" y="{}" dy="4">{}</text>"#,
        f(lx + 24.0),
        f(ly),
        esc(baseline)
    )
    .unwrap();
    for (i, v) in variants.iter().enumerate() {
        ly += 18.0;
        marker(&mut out, i, lx + 9.0, ly, "#333", true);
        writeln!(
            out,
            r#"<text x="{}" y="{}" dy="4">{}</text>"#,
            f(lx + 24.0),
            f(ly),
            esc(v)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// BD-VMAF against BD-VMAF-NEG, one labelled point per sequence, with the
/// zero lines drawn so quadrants read directly.
pub fn bd_scatter(points: &[(String, f64, f64)], title: &str) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (_, x, y) in points {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    let fr = Frame::padded(x0, x1, y0, y1);
    let mut out = String::new();
    header(&mut out, title);
    let ticks = |lo, hi| {
        let v = nice_ticks(lo, hi, 6);
        let step = if v.len() > 1 { v[1] - v[0] } else { 1.0 };
        v.into_iter()
            .map(|t| (t, tick_label(t, step)))
            .collect::<Vec<_>>()
    };
    axes(
        &mut out,
        &fr,
        &ticks(fr.x0, fr.x1),
        &ticks(fr.y0, fr.y1),
        "BD-VMAF (%)",
        "BD-VMAF-NEG (%)",
    );
    let (zx, zy) = (f(fr.sx(0.0)), f(fr.sy(0.0)));
    writeln!(
        out,
        r##"<line x1="{zx}" y1="{}" x2="{zx}" y2="{}" stroke="#333"/>"##,
        f(TOP),
        f(H - BOTTOM)
    )
    .unwrap();
    writeln!(
        out,
        r##"<line x1="{}" y1="{zy}" x2="{}" y2="{zy}" stroke="#333"/>"##,
        f(LEFT),
        f(W - RIGHT)
    )
    .unwrap();
    for (name, x, y) in points {
        let color = if *x > 0.0 && *y > 0.0 {
            "#d62728"
        } else {
            "#1f77b4"
        };
        let (px, py) = (fr.sx(*x), fr.sy(*y));
        writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="4" fill="{color}"/>"#,
            f(px),
            f(py)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10">{}</text>"#,
            f(px + 6.0),
            f(py - 4.0),
            esc(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Filesystem-safe fragment for per-sequence file names.
pub fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RDPoint;

    fn curve(seq: &str, var: &str, scale: f64) -> RDCurve {
        let mut c = RDCurve::new(seq, var);
        for (i, qp) in [22u32, 27, 32, 37].into_iter().enumerate() {
            let rate = 8000.0 * scale / 2f64.powi(i as i32);
            c.points
                .push(RDPoint::new(qp, rate).with_score(MetricKind::Vmaf, 95.0 - 7.0 * i as f64));
        }
        c
    }

    #[test]
    fn deterministic_and_counts_markers() {
        let curves = vec![
            curve("A", "baseline", 1.0),
            curve("A", "v", 0.7),
            curve("B&C", "baseline", 2.0),
        ];
        let a = rd_plot(&curves, MetricKind::Vmaf, "baseline", "t");
        let b = rd_plot(&curves, MetricKind::Vmaf, "baseline", "t");
        assert_eq!(a, b);
        assert_eq!(a.matches("<polyline").count(), 3);
        // 12 data markers plus 2 legend markers
        assert_eq!(a.matches(r#"r="4""#).count(), 14);
        assert!(a.contains("B&amp;C"));
        assert!(a.starts_with("<svg"));
    }

    #[test]
    fn scatter_colours_upper_right() {
        let pts = vec![
            ("a".to_string(), -20.0, -5.0),
            ("b".to_string(), 58.48, 71.61),
        ];
        let s = bd_scatter(&pts, "s");
        assert_eq!(s.matches("#d62728").count(), 1);
    }

    #[test]
    fn ticks() {
        assert_eq!(
            nice_ticks(0.0, 10.0, 5),
            vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
        );
        let lt = log_ticks(3.0, 4.2);
        assert!(lt.contains(&3.0) && lt.contains(&4.0));
        assert_eq!(kbps_label(3.0), "1M");
        assert_eq!(kbps_label(2.0), "100k");
    }
}
