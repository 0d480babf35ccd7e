//! Spatial gradient/divergence, temporal difference and motion coupling.
//!
//! The gradient uses forward differences with a Neumann boundary: the last
//! column (row) difference is zero. Component 0 differentiates along
//! columns (x), component 1 along rows (y). `div` is exactly `-grad^T`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;

use super::{as_complex, as_complex_mut, LinearOperator};
use crate::error::{Error, Result};
use crate::types::{FlowField, ImageSequence};

/// Scalar types the stencils run on (`f64` and `Complex64`).
pub trait Field:
    Copy
    + Send
    + Sync
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + SubAssign
{
}

impl<T> Field for T where
    T: Copy
        + Send
        + Sync
        + Zero
        + Add<Output = T>
        + Sub<Output = T>
        + Neg<Output = T>
        + Mul<f64, Output = T>
        + AddAssign
        + SubAssign
{
}

/// `out[2i] = d/dx`, `out[2i+1] = d/dy` at pixel `i`.
pub fn grad<T: Field>(src: &[T], h: usize, w: usize, out: &mut [T]) {
    debug_assert_eq!(src.len(), h * w);
    debug_assert_eq!(out.len(), 2 * h * w);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let v = src[i];
            out[2 * i] = if c + 1 < w { src[i + 1] - v } else { T::zero() };
            out[2 * i + 1] = if r + 1 < h { src[i + w] - v } else { T::zero() };
        }
    }
}

/// Backward-difference divergence, the negative adjoint of [`grad`].
pub fn div<T: Field>(p: &[T], h: usize, w: usize, out: &mut [T]) {
    debug_assert_eq!(p.len(), 2 * h * w);
    debug_assert_eq!(out.len(), h * w);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut acc = T::zero();
            if c + 1 < w {
                acc += p[2 * i];
            }
            if c > 0 {
                acc -= p[2 * (i - 1)];
            }
            if r + 1 < h {
                acc += p[2 * i + 1];
            }
            if r > 0 {
                acc -= p[2 * (i - w) + 1];
            }
            out[i] = acc;
        }
    }
}

fn check_grid(h: usize, w: usize) -> Result<()> {
    if h < 2 || w < 2 {
        return Err(Error::Dimension(format!(
            "differential operators need at least 2x2, got {h}x{w}"
        )));
    }
    Ok(())
}

/// Checked wrapper around [`grad`].
pub fn gradient<T: Field>(field: &[T], h: usize, w: usize) -> Result<Vec<T>> {
    check_grid(h, w)?;
    if field.len() != h * w {
        return Err(Error::Dimension(format!(
            "field has {} values, expected {}",
            field.len(),
            h * w
        )));
    }
    let mut out = vec![T::zero(); 2 * h * w];
    grad(field, h, w, &mut out);
    Ok(out)
}

/// Checked wrapper around [`div`].
pub fn divergence<T: Field>(p: &[T], h: usize, w: usize) -> Result<Vec<T>> {
    check_grid(h, w)?;
    if p.len() != 2 * h * w {
        return Err(Error::Dimension(format!(
            "vector field has {} values, expected {}",
            p.len(),
            2 * h * w
        )));
    }
    let mut out = vec![T::zero(); h * w];
    div(p, h, w, &mut out);
    Ok(out)
}

/// `u_{k+1} - u_k` for every consecutive pair.
pub fn temporal_diff(u: &ImageSequence) -> Result<ImageSequence> {
    if u.frames() < 2 {
        return Err(Error::Dimension(
            "temporal difference needs at least two frames".into(),
        ));
    }
    let data = (0..u.frames() - 1)
        .flat_map(|k| u.frame(k + 1).iter().zip(u.frame(k)).map(|(a, b)| a - b))
        .collect();
    ImageSequence::new(u.frames() - 1, u.height(), u.width(), data)
}

/// `grad(u_k) . v_k + u_{k+1} - u_k` for every pair; the real flow acts on
/// the real and imaginary parts alike.
pub fn motion_op(u: &ImageSequence, v: &FlowField) -> Result<ImageSequence> {
    let op = MotionOp::new(u.frames(), u.height(), u.width(), v)?;
    let x: Vec<f64> = super::as_real(u.data()).to_vec();
    let out = op.apply_vec(&x);
    ImageSequence::new(
        u.frames() - 1,
        u.height(),
        u.width(),
        as_complex(&out).to_vec(),
    )
}

/// Per-frame spatial gradient of a real or complex sequence.
#[derive(Clone, Copy, Debug)]
pub struct GradientOp {
    frames: usize,
    height: usize,
    width: usize,
    complex: bool,
}

impl GradientOp {
    pub fn real(frames: usize, height: usize, width: usize) -> Result<Self> {
        check_grid(height, width)?;
        Ok(Self {
            frames,
            height,
            width,
            complex: false,
        })
    }

    pub fn complex(frames: usize, height: usize, width: usize) -> Result<Self> {
        check_grid(height, width)?;
        Ok(Self {
            frames,
            height,
            width,
            complex: true,
        })
    }

    fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl LinearOperator for GradientOp {
    fn dim_in(&self) -> usize {
        self.frames * self.pixels() * if self.complex { 2 } else { 1 }
    }

    fn dim_out(&self) -> usize {
        2 * self.dim_in()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (h, w, n) = (self.height, self.width, self.pixels());
        if self.complex {
            let xs = as_complex(x);
            as_complex_mut(out)
                .par_chunks_mut(2 * n)
                .zip(xs.par_chunks(n))
                .for_each(|(o, f)| grad(f, h, w, o));
        } else {
            out.par_chunks_mut(2 * n)
                .zip(x.par_chunks(n))
                .for_each(|(o, f)| grad(f, h, w, o));
        }
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        let (h, w, n) = (self.height, self.width, self.pixels());
        if self.complex {
            let ys = as_complex(y);
            as_complex_mut(out)
                .par_chunks_mut(n)
                .zip(ys.par_chunks(2 * n))
                .for_each(|(o, p)| {
                    div(p, h, w, o);
                    o.iter_mut().for_each(|v| *v = -*v);
                });
        } else {
            out.par_chunks_mut(n)
                .zip(y.par_chunks(2 * n))
                .for_each(|(o, p)| {
                    div(p, h, w, o);
                    o.iter_mut().for_each(|v| *v = -*v);
                });
        }
    }
}

/// Temporal forward difference of a complex sequence.
#[derive(Clone, Copy, Debug)]
pub struct TemporalDiffOp {
    frames: usize,
    pixels: usize,
}

impl TemporalDiffOp {
    pub fn new(frames: usize, height: usize, width: usize) -> Result<Self> {
        if frames < 2 {
            return Err(Error::Dimension(
                "temporal difference needs at least two frames".into(),
            ));
        }
        Ok(Self {
            frames,
            pixels: height * width,
        })
    }
}

impl LinearOperator for TemporalDiffOp {
    fn dim_in(&self) -> usize {
        2 * self.frames * self.pixels
    }

    fn dim_out(&self) -> usize {
        2 * (self.frames - 1) * self.pixels
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = 2 * self.pixels;
        for (k, o) in out.chunks_mut(m).enumerate() {
            let (a, b) = (&x[k * m..(k + 1) * m], &x[(k + 1) * m..(k + 2) * m]);
            for ((o, a), b) in o.iter_mut().zip(a).zip(b) {
                *o = b - a;
            }
        }
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        let m = 2 * self.pixels;
        let last = self.frames - 1;
        for (k, o) in out.chunks_mut(m).enumerate() {
            for (i, v) in o.iter_mut().enumerate() {
                let prev = if k > 0 { y[(k - 1) * m + i] } else { 0.0 };
                let next = if k < last { y[k * m + i] } else { 0.0 };
                *v = prev - next;
            }
        }
    }
}

/// Motion coupling `u -> grad(u_k) . v_k + u_{k+1} - u_k` for a frozen flow,
/// linear in the complex sequence `u`.
#[derive(Clone, Debug)]
pub struct MotionOp {
    frames: usize,
    height: usize,
    width: usize,
    flow: Vec<f64>,
}

impl MotionOp {
    pub fn new(frames: usize, height: usize, width: usize, flow: &FlowField) -> Result<Self> {
        check_grid(height, width)?;
        if frames < 2 || flow.pairs() != frames - 1 {
            return Err(Error::Dimension(format!(
                "flow has {} pairs, sequence has {frames} frames",
                flow.pairs()
            )));
        }
        if flow.height() != height || flow.width() != width {
            return Err(Error::Dimension("flow grid differs from image grid".into()));
        }
        Ok(Self {
            frames,
            height,
            width,
            flow: flow.data().to_vec(),
        })
    }

    fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl LinearOperator for MotionOp {
    fn dim_in(&self) -> usize {
        2 * self.frames * self.pixels()
    }

    fn dim_out(&self) -> usize {
        2 * (self.frames - 1) * self.pixels()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (h, w, n) = (self.height, self.width, self.pixels());
        let u = as_complex(x);
        as_complex_mut(out)
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(k, o)| {
                let uk = &u[k * n..(k + 1) * n];
                let uk1 = &u[(k + 1) * n..(k + 2) * n];
                let v = &self.flow[k * 2 * n..(k + 1) * 2 * n];
                let mut g = vec![Complex64::zero(); 2 * n];
                grad(uk, h, w, &mut g);
                for i in 0..n {
                    o[i] = g[2 * i] * v[2 * i] + g[2 * i + 1] * v[2 * i + 1] + uk1[i] - uk[i];
                }
            });
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        let (h, w, n) = (self.height, self.width, self.pixels());
        let pairs = self.frames - 1;
        let r = as_complex(y);
        as_complex_mut(out)
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(k, o)| {
                o.fill(Complex64::zero());
                if k < pairs {
                    let rk = &r[k * n..(k + 1) * n];
                    let v = &self.flow[k * 2 * n..(k + 1) * 2 * n];
                    let q: Vec<Complex64> = (0..2 * n).map(|j| rk[j / 2] * v[j]).collect();
                    div(&q, h, w, o);
                    for (oi, ri) in o.iter_mut().zip(rk) {
                        *oi = -*oi - ri;
                    }
                }
                if k > 0 {
                    let prev = &r[(k - 1) * n..k * n];
                    for (oi, ri) in o.iter_mut().zip(prev) {
                        *oi += ri;
                    }
                }
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{as_real, Identity};
    use csm_oracles::adjoint::max_pairing_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairing(op: &dyn LinearOperator, seed: u64) -> f64 {
        max_pairing_error(
            op.dim_in(),
            op.dim_out(),
            |x| op.apply_vec(x),
            |y| op.adjoint_vec(y),
            20,
            seed,
        )
    }

    fn random_flow(pairs: usize, h: usize, w: usize, seed: u64) -> FlowField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FlowField::new(
            pairs,
            h,
            w,
            (0..pairs * h * w * 2)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
        )
        .unwrap()
    }

    fn random_sequence(frames: usize, h: usize, w: usize, seed: u64) -> ImageSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..frames * h * w)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ImageSequence::new(frames, h, w, data).unwrap()
    }

    #[test]
    fn gradient_of_constant_and_ramp() {
        let (h, w) = (5, 6);
        let g = gradient(&vec![3.0; h * w], h, w).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let ramp: Vec<f64> = (0..h * w).map(|i| (i % w) as f64).collect();
        let g = gradient(&ramp, h, w).unwrap();
        for r in 0..h {
            for c in 0..w {
                let dx = g[2 * (r * w + c)];
                assert_eq!(dx, if c + 1 < w { 1.0 } else { 0.0 });
                assert_eq!(g[2 * (r * w + c) + 1], 0.0);
            }
        }
        assert!(gradient(&[1.0, 2.0], 1, 2).is_err());
    }

    #[test]
    fn divergence_basics() {
        let (h, w) = (4, 4);
        assert!(divergence(&vec![0.0; 2 * h * w], h, w)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let g = gradient(&vec![1.5; h * w], h, w).unwrap();
        assert!(divergence(&g, h, w).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_div_pairing_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (h, w) = (9, 7);
        for _ in 0..20 {
            let u: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p: Vec<f64> = (0..2 * h * w)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let lhs: f64 = gradient(&u, h, w)
                .unwrap()
                .iter()
                .zip(&p)
                .map(|(a, b)| a * b)
                .sum();
            let rhs: f64 = -divergence(&p, h, w)
                .unwrap()
                .iter()
                .zip(&u)
                .map(|(a, b)| a * b)
                .sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn every_operator_passes_the_adjoint_test() {
        let (f, h, w) = (3, 6, 5);
        assert!(pairing(&GradientOp::real(f, h, w).unwrap(), 1) < 1e-12);
        assert!(pairing(&GradientOp::complex(f, h, w).unwrap(), 2) < 1e-12);
        assert!(pairing(&TemporalDiffOp::new(f, h, w).unwrap(), 3) < 1e-12);
        let m = MotionOp::new(f, h, w, &random_flow(f - 1, h, w, 4)).unwrap();
        assert!(pairing(&m, 5) < 1e-12);
        assert!(pairing(&Identity { n: 11 }, 6) <= 1e-15);
    }

    #[test]
    fn temporal_diff_examples() {
        let u = ImageSequence::from_real(3, 2, 2, &[0.5; 12]).unwrap();
        assert!(temporal_diff(&u)
            .unwrap()
            .data()
            .iter()
            .all(|z| z.norm() == 0.0));
        let mut vals = vec![0.0; 8];
        vals[4..].fill(1.0);
        let u = ImageSequence::from_real(2, 2, 2, &vals).unwrap();
        let d = temporal_diff(&u).unwrap();
        assert_eq!(d.frames(), 1);
        assert!(d.data().iter().all(|z| z.re == 1.0 && z.im == 0.0));
        let single = ImageSequence::zeros(1, 2, 2).unwrap();
        assert!(temporal_diff(&single).is_err());
    }

    #[test]
    fn motion_with_zero_flow_is_temporal_diff() {
        let u = random_sequence(4, 5, 6, 8);
        let zero = FlowField::zeros(3, 5, 6).unwrap();
        assert_eq!(motion_op(&u, &zero).unwrap(), temporal_diff(&u).unwrap());
    }

    #[test]
    fn motion_of_static_constant_frames_vanishes() {
        let u = ImageSequence::from_real(3, 4, 4, &[0.25; 48]).unwrap();
        let out = motion_op(&u, &random_flow(2, 4, 4, 1)).unwrap();
        assert!(out.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn motion_op_rejects_mismatched_flow() {
        let u = random_sequence(3, 4, 4, 1);
        assert!(motion_op(&u, &FlowField::zeros(3, 4, 4).unwrap()).is_err());
        assert!(motion_op(&u, &FlowField::zeros(2, 4, 5).unwrap()).is_err());
    }

    #[test]
    fn operators_are_linear() {
        let (f, h, w) = (3, 5, 4);
        let flow = random_flow(f - 1, h, w, 2);
        let ops: Vec<Box<dyn LinearOperator>> = vec![
            Box::new(GradientOp::complex(f, h, w).unwrap()),
            Box::new(TemporalDiffOp::new(f, h, w).unwrap()),
            Box::new(MotionOp::new(f, h, w, &flow).unwrap()),
        ];
        let x = random_sequence(f, h, w, 10);
        let y = random_sequence(f, h, w, 11);
        let (a, b) = (0.7, -1.3);
        for op in &ops {
            let xr = as_real(x.data());
            let yr = as_real(y.data());
            let combo: Vec<f64> = xr.iter().zip(yr).map(|(p, q)| a * p + b * q).collect();
            let lhs = op.apply_vec(&combo);
            let ax = op.apply_vec(xr);
            let ay = op.apply_vec(yr);
            let scale = lhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            for i in 0..lhs.len() {
                assert!((lhs[i] - (a * ax[i] + b * ay[i])).abs() <= 1e-12 * scale);
            }
        }
    }
}
