//! Centred, unitary 2-D DFT built on rustfft.
//!
//! `X[k] = 1/sqrt(N) * sum_n x[n] exp(-2 pi i (k - c)(n - c) / N)` along each
//! axis, with `c = N / 2` so the zero frequency sits at the grid centre.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    height: usize,
    width: usize,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            scale: 1.0 / ((height * width) as f64).sqrt(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Forward transform of every row and column.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.columns(data, &self.col_fwd);
        let all = vec![true; self.height];
        self.rows(data, &all, &self.row_fwd);
    }

    /// Inverse transform of every row and column.
    pub fn inverse(&self, data: &mut [Complex64]) {
        let all = vec![true; self.height];
        self.rows(data, &all, &self.row_inv);
        self.columns(data, &self.col_inv);
    }

    /// Forward transform whose output is only needed on `active` rows; the
    /// remaining output rows are set to zero.
    pub fn forward_rows(&self, data: &mut [Complex64], active: &[bool]) {
        self.columns(data, &self.col_fwd);
        self.rows(data, active, &self.row_fwd);
    }

    /// Inverse transform of an input that is zero outside `active` rows.
    pub fn inverse_rows(&self, data: &mut [Complex64], active: &[bool]) {
        self.rows(data, active, &self.row_inv);
        self.columns(data, &self.col_inv);
    }

    fn columns(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.height, self.width);
        let c = h / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); h * w];
        // Rotated transpose: column `col` lands in `buf[col * h..]` starting
        // at source row `c`.
        for r in 0..h {
            let m = (r + h - c) % h;
            for (col, v) in data[r * w..(r + 1) * w].iter().enumerate() {
                buf[col * h + m] = *v;
            }
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..h {
            let m = (k + h - c) % h;
            for (col, d) in data[k * w..(k + 1) * w].iter_mut().enumerate() {
                *d = buf[col * h + m];
            }
        }
    }

    fn rows(&self, data: &mut [Complex64], active: &[bool], plan: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.height, self.width);
        let c = w / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); w];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for r in 0..h {
            let row = &mut data[r * w..(r + 1) * w];
            if !active[r] {
                row.fill(Complex64::new(0.0, 0.0));
                continue;
            }
            buf[..w - c].copy_from_slice(&row[c..]);
            buf[w - c..].copy_from_slice(&row[..c]);
            plan.process_with_scratch(&mut buf, &mut scratch);
            let s = self.scale;
            for (d, v) in row[..c].iter_mut().zip(&buf[w - c..]) {
                *d = v * s;
            }
            for (d, v) in row[c..].iter_mut().zip(&buf[..w - c]) {
                *d = v * s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use csm_oracles::dft::{centered_dft2, centered_idft2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(h: usize, w: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..h * w)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_direct_summation() {
        for &(h, w) in &[(8, 8), (7, 5), (4, 9)] {
            let x = random_field(h, w, (h * w) as u64);
            let mut fast = x.clone();
            Fft2::new(h, w).forward(&mut fast);
            assert!(max_diff(&fast, &centered_dft2(&x, h, w)) < 1e-10, "{h}x{w}");
            let mut back = fast.clone();
            Fft2::new(h, w).inverse(&mut back);
            assert!(max_diff(&back, &x) < 1e-12);
            assert!(max_diff(&centered_idft2(&fast, h, w), &x) < 1e-10);
        }
    }

    #[test]
    fn impulse_at_center_is_flat() {
        let (h, w) = (6, 8);
        let mut x = vec![Complex64::new(0.0, 0.0); h * w];
        x[(h / 2) * w + w / 2] = Complex64::new(1.0, 0.0);
        Fft2::new(h, w).forward(&mut x);
        let expected = 1.0 / ((h * w) as f64).sqrt();
        for z in x {
            assert!((z.re - expected).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn row_restricted_transform_agrees_on_active_rows() {
        let (h, w) = (8, 6);
        let x = random_field(h, w, 3);
        let active: Vec<bool> = (0..h).map(|r| r % 3 == 0).collect();
        let fft = Fft2::new(h, w);
        let mut full = x.clone();
        fft.forward(&mut full);
        let mut part = x.clone();
        fft.forward_rows(&mut part, &active);
        for r in 0..h {
            for c in 0..w {
                let expected = if active[r] {
                    full[r * w + c]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((part[r * w + c] - expected).norm() < 1e-14);
            }
        }
        // inverse of a row-sparse spectrum
        let mut inv_full = part.clone();
        fft.inverse(&mut inv_full);
        let mut inv_part = part;
        fft.inverse_rows(&mut inv_part, &active);
        assert!(max_diff(&inv_full, &inv_part) < 1e-14);
    }
}
