//! Direct O(N^2) centred unitary DFT.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Largest side length the direct transform accepts.
pub const MAX_SIDE: usize = 16;

fn transform(x: &[Complex64], h: usize, w: usize, sign: f64) -> Vec<Complex64> {
    assert!(
        h <= MAX_SIDE && w <= MAX_SIDE,
        "oracle DFT capped at {MAX_SIDE}x{MAX_SIDE}"
    );
    assert_eq!(x.len(), h * w);
    let (ch, cw) = ((h / 2) as f64, (w / 2) as f64);
    let norm = 1.0 / ((h * w) as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for ky in 0..h {
        for kx in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for ny in 0..h {
                for nx in 0..w {
                    let phase = sign
                        * 2.0
                        * PI
                        * ((ky as f64 - ch) * (ny as f64 - ch) / h as f64
                            + (kx as f64 - cw) * (nx as f64 - cw) / w as f64);
                    acc += x[ny * w + nx] * Complex64::from_polar(1.0, phase);
                }
            }
            out[ky * w + kx] = acc * norm;
        }
    }
    out
}

/// Forward transform, zero frequency at `(h/2, w/2)`.
pub fn centered_dft2(x: &[Complex64], h: usize, w: usize) -> Vec<Complex64> {
    transform(x, h, w, -1.0)
}

pub fn centered_idft2(x: &[Complex64], h: usize, w: usize) -> Vec<Complex64> {
    transform(x, h, w, 1.0)
}
