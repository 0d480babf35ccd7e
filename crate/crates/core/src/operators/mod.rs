//! Linear operators of the model, each with an exact adjoint.
//!
//! Operators act on flat real vectors. Complex data is stored interleaved
//! `(re, im)`, so the real inner product of two such vectors is the real
//! part of the complex one and the real adjoint is the conjugate transpose.

mod differential;
mod encoding;
pub mod fft;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use differential::{
    div, divergence, grad, gradient, motion_op, temporal_diff, Field, GradientOp, MotionOp,
    TemporalDiffOp,
};
pub use encoding::{encode, encode_adjoint, Encoder};

use crate::error::{Error, Result};

/// A real-linear map between flat `f64` vectors.
pub trait LinearOperator: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    /// `out = K x`; `out` is overwritten.
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = K^T y`; `out` is overwritten.
    fn adjoint(&self, y: &[f64], out: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out()];
        self.apply(x, &mut out);
        out
    }

    fn adjoint_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_in()];
        self.adjoint(y, &mut out);
        out
    }
}

/// Reinterprets interleaved `(re, im)` storage as complex values.
pub fn as_complex(x: &[f64]) -> &[Complex64] {
    bytemuck::cast_slice(x)
}

pub fn as_complex_mut(x: &mut [f64]) -> &mut [Complex64] {
    bytemuck::cast_slice_mut(x)
}

pub fn as_real(x: &[Complex64]) -> &[f64] {
    bytemuck::cast_slice(x)
}

#[derive(Clone, Copy, Debug)]
pub struct Identity {
    pub n: usize,
}

impl LinearOperator for Identity {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// `factor * K`.
pub struct Scaled<'a> {
    pub op: &'a dyn LinearOperator,
    pub factor: f64,
}

impl LinearOperator for Scaled<'_> {
    fn dim_in(&self) -> usize {
        self.op.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.op.dim_out()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        self.op.adjoint(y, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
}

/// Vertical concatenation `[K_1; K_2; ...]` sharing one input space; the
/// output is the concatenation of the block outputs.
pub struct Stack<'a> {
    blocks: Vec<&'a dyn LinearOperator>,
}

impl<'a> Stack<'a> {
    pub fn new(blocks: Vec<&'a dyn LinearOperator>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidArgument("empty operator stack".into()));
        };
        if blocks.iter().any(|b| b.dim_in() != first.dim_in()) {
            return Err(Error::Dimension(
                "stacked operators disagree on input size".into(),
            ));
        }
        Ok(Self { blocks })
    }

    /// Output ranges of the blocks, in order.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = start..start + b.dim_out();
                start = r.end;
                r
            })
            .collect()
    }
}

impl LinearOperator for Stack<'_> {
    fn dim_in(&self) -> usize {
        self.blocks[0].dim_in()
    }
    fn dim_out(&self) -> usize {
        self.blocks.iter().map(|b| b.dim_out()).sum()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (b, r) in self.blocks.iter().zip(self.ranges()) {
            b.apply(x, &mut out[r]);
        }
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut part = vec![0.0; out.len()];
        for (b, r) in self.blocks.iter().zip(self.ranges()) {
            b.adjoint(&y[r], &mut part);
            out.iter_mut().zip(&part).for_each(|(o, p)| *o += p);
        }
    }
}

/// Power-method estimate of `|K| = sqrt(lambda_max(K^T K))`.
///
/// The Rayleigh-quotient estimate approaches the true norm from below and is
/// deterministic for a given seed. A zero operator yields 0.
pub fn operator_norm(op: &dyn LinearOperator, iters: usize, seed: u64) -> Result<f64> {
    if iters == 0 {
        return Err(Error::InvalidArgument(
            "power method needs at least one iteration".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..op.dim_in())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut kx = vec![0.0; op.dim_out()];
    let mut estimate = 0.0;
    for _ in 0..iters {
        let nx = norm(&x);
        if nx == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= nx);
        op.apply(&x, &mut kx);
        estimate = norm(&kx);
        if estimate == 0.0 {
            return Ok(0.0);
        }
        op.adjoint(&kx, &mut x);
    }
    Ok(estimate)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
