//! Shape-preserving piecewise cubic Hermite interpolation.
//!
//! Derivatives follow the Fritsch–Carlson construction as popularised by
//! SciPy's `PchipInterpolator`: weighted harmonic means at interior knots,
//! zero slope at local extrema, and a one-sided three-point estimate at the
//! ends that is clamped to preserve shape.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
    derivs: Vec<f64>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn edge_derivative(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if sign(d) != sign(m0) {
        0.0
    } else if sign(m0) != sign(m1) && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Interpolant {
    pub fn knots_x(&self) -> &[f64] {
        &self.knots_x
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.knots_y
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    /// Closed span `[x_first, x_last]`.
    pub fn span(&self) -> (f64, f64) {
        (self.knots_x[0], *self.knots_x.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.knots_x.len();
        // partition_point gives the first knot strictly greater than x
        let i = self.knots_x.partition_point(|&k| k <= x);
        i.saturating_sub(1).min(n - 2)
    }

    /// Evaluates the interpolant. Outside the span the end cubics are
    /// extended; callers doing BD integration never leave the span.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let x0 = self.knots_x[i];
        let h = self.knots_x[i + 1] - x0;
        let t = (x - x0) / h;
        if t == 0.0 {
            return self.knots_y[i];
        }
        if t == 1.0 {
            return self.knots_y[i + 1];
        }
        let (y0, y1) = (self.knots_y[i], self.knots_y[i + 1]);
        let (d0, d1) = (self.derivs[i], self.derivs[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }
}

/// Builds the monotone Hermite interpolant through `(xs[i], ys[i])`.
pub fn pchip_fit(xs: &[f64], ys: &[f64]) -> Result<Interpolant> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::invalid(format!(
            "pchip: {} abscissae but {} ordinates",
            n,
            ys.len()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("pchip: need at least 2 knots"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("pchip: non-finite knot"));
    }
    let mut h = Vec::with_capacity(n - 1);
    let mut m = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let dx = xs[i + 1] - xs[i];
        if dx <= 0.0 {
            return Err(Error::invalid(format!(
                "pchip: abscissae not strictly increasing at index {}",
                i + 1
            )));
        }
        h.push(dx);
        m.push((ys[i + 1] - ys[i]) / dx);
    }

    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = m[0];
        d[1] = m[0];
    } else {
        for k in 1..n - 1 {
            let (m0, m1) = (m[k - 1], m[k]);
            if sign(m0) != sign(m1) || m0 == 0.0 || m1 == 0.0 {
                d[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / m0 + w2 / m1);
            }
        }
        d[0] = edge_derivative(h[0], h[1], m[0], m[1]);
        d[n - 1] = edge_derivative(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
    }

    Ok(Interpolant {
        knots_x: xs.to_vec(),
        knots_y: ys.to_vec(),
        derivs: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_linear_data() {
        let xs = [0.5, 1.0, 2.5, 3.0, 7.0];
        let ys: Vec<f64> = xs.to_vec();
        let p = pchip_fit(&xs, &ys).unwrap();
        for i in 0..=650 {
            let x = 0.5 + i as f64 * 0.01;
            assert!((p.eval(x) - x).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn exact_at_knots() {
        let xs = [1.0, 2.0, 3.5, 4.0];
        let ys = [3.0, -1.0, 2.0, 2.5];
        let p = pchip_fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(p.eval(*x), y);
        }
    }

    #[test]
    fn monotone_on_squares() {
        let p = pchip_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]).unwrap();
        let mut prev = p.eval(1.0);
        for i in 1..=1000 {
            let v = p.eval(1.0 + 3.0 * i as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn matches_scipy_reference() {
        // scipy.interpolate.PchipInterpolator([1,2,4,5],[1,3,3.5,8])
        let p = pchip_fit(&[1.0, 2.0, 4.0, 5.0], &[1.0, 3.0, 3.5, 8.0]).unwrap();
        let expect = [
            (1.5, 2.262105855855856),
            (3.0, 3.240128115128115),
            (4.5, 5.07616341991342),
        ];
        for (x, y) in expect {
            assert!((p.eval(x) - y).abs() < 1e-12, "x={x}: {} vs {y}", p.eval(x));
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(pchip_fit(&[1.0], &[1.0]).is_err());
        assert!(pchip_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pchip_fit(&[2.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pchip_fit(&[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn no_overshoot_on_monotone_data(
            steps in prop::collection::vec((0.05f64..3.0, 0.0f64..5.0), 1..8),
            decreasing in any::<bool>(),
        ) {
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for (dx, dy) in &steps {
                xs.push(xs.last().unwrap() + dx);
                let dy = if decreasing { -dy } else { *dy };
                ys.push(ys.last().unwrap() + dy);
            }
            let p = pchip_fit(&xs, &ys).unwrap();
            let (lo, hi) = p.span();
            let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut prev = p.eval(lo);
            for i in 1..=1000 {
                let v = p.eval(lo + (hi - lo) * i as f64 / 1000.0);
                prop_assert!(v >= ymin - 1e-9 && v <= ymax + 1e-9);
                if decreasing {
                    prop_assert!(v <= prev + 1e-9);
                } else {
                    prop_assert!(v >= prev - 1e-9);
                }
                prev = v;
            }
        }
    }
}
