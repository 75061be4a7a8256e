//! Adaptive Simpson quadrature.

const MAX_DEPTH: u32 = 48;

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first split at `breaks` (sorted, inside `(a, b)`) so that
/// piecewise-smooth integrands are handled one smooth piece at a time.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, breaks: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(a);
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let width = b - a;
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let piece_tol = tol * (hi - lo) / width;
        let (fa, fb) = (f(lo), f(hi));
        let fm = f(0.5 * (lo + hi));
        let whole = simpson(fa, fm, fb, lo, hi);
        total += recurse(&f, lo, hi, fa, fm, fb, whole, piece_tol, 0);
    }
    total
}
