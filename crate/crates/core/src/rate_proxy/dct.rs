//! Orthonormal 8×8 type-II DCT and its inverse.

use std::sync::OnceLock;

pub type Block = [[f64; 8]; 8];

/// `basis[u][x] = alpha(u) * cos((2x + 1) u pi / 16)`
fn basis() -> &'static Block {
    static BASIS: OnceLock<Block> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [[0.0; 8]; 8];
        for (u, row) in c.iter_mut().enumerate() {
            let alpha = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = alpha * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        c
    })
}

/// Forward 2-D DCT of a level-shifted block: rows index y, columns x.
pub fn dct8x8(block: &Block) -> Block {
    let c = basis();
    // tmp = C * B
    let mut tmp = [[0.0; 8]; 8];
    for u in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for y in 0..8 {
                s += c[u][y] * block[y][x];
            }
            tmp[u][x] = s;
        }
    }
    // out = tmp * C^T
    let mut out = [[0.0; 8]; 8];
    for u in 0..8 {
        for v in 0..8 {
            let mut s = 0.0;
            for x in 0..8 {
                s += tmp[u][x] * c[v][x];
            }
            out[u][v] = s;
        }
    }
    out
}

/// Inverse of [`dct8x8`].
pub fn idct8x8(coeffs: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; 8]; 8];
    for y in 0..8 {
        for v in 0..8 {
            let mut s = 0.0;
            for u in 0..8 {
                s += c[u][y] * coeffs[u][v];
            }
            tmp[y][v] = s;
        }
    }
    let mut out = [[0.0; 8]; 8];
    for y in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for v in 0..8 {
                s += tmp[y][v] * c[v][x];
            }
            out[y][x] = s;
        }
    }
    out
}
